#pragma once

// Procedural meshes and small deformation datasets for tests and demos.

#include "meshvae/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace meshvae::toy {

/// Subdivided icosahedron on the unit sphere: 12, 42, 162, 642, ... vertices.
Mesh icosphere(unsigned subdivisions);

/// Open tube along z, centred at the origin. rings x segments vertices.
Mesh open_cylinder(std::size_t rings, std::size_t segments, double radius = 0.5, double height = 4.0);

/// Closed torus with major x minor vertices.
Mesh torus(std::size_t major, std::size_t minor, double major_radius = 2.0, double minor_radius = 0.7);

/// n x n planar grid whose spacing grows geometrically so the largest edge
/// is `ratio` times the smallest along each axis.
Mesh graded_grid(std::size_t n, double ratio = 10.0);

Mesh tetrahedron();

/// Bend/twist/stretch of a tube along z. Bend curvature acts in the
/// direction at `bend_angle` within the xy plane.
struct TubePose {
    double curvature = 0.0;
    double bend_angle = 0.0;
    double twist = 0.0;   // radians per unit length
    double stretch = 1.0; // axial scale
    double bulge = 1.0;   // radial scale
    double shear = 0.0;   // x += shear * z
};

std::vector<Vec3> pose_tube(const Mesh& tube, const TubePose& pose);

struct Dataset {
    Mesh base;                      // rest pose; also shapes[0]
    std::vector<Mesh> shapes;
    std::vector<std::size_t> labels; // empty unless labelled
};

/// `count` poses of a 500-vertex tube; shape 0 is the rest pose.
Dataset bent_cylinders(std::size_t count, std::uint64_t seed);

/// A bar rotating about z, one full turn over `frames` frames.
Dataset rotating_bar(std::size_t frames);

/// Two classes on the same tube: class 0 bends, class 1 twists and bulges.
Dataset two_class(std::size_t per_class, std::uint64_t seed);

/// Writes shape_###.obj files (plus labels.txt when labelled). Returns the
/// file names in order.
std::vector<std::string> write_dataset(const std::filesystem::path& dir, const Dataset& data);

} // namespace meshvae::toy
