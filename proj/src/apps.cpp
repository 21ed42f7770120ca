#include "meshvae/apps.hpp"

#include "meshvae/error.hpp"
#include "meshvae/log.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace meshvae::apps {

namespace fs = std::filesystem;

namespace {

// ---- config parsing helpers ------------------------------------------------

template <class T>
T parse_number(const std::string& key, const std::string& text)
{
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw InputError("config: " + key + ": cannot parse '" + text + "'");
    return value;
}

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string frame_name(const char* prefix, std::size_t i)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu.obj", prefix, i);
    return buf;
}

std::vector<std::string> read_lines(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!line.empty())
            out.push_back(line);
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    out << text;
    out.flush();
    if (!out)
        throw InputError("cannot write " + path.string());
}

// name -> class from a "name<whitespace>label" file
std::map<std::string, std::size_t> read_labels(const fs::path& path)
{
    std::map<std::string, std::size_t> labels;
    for (const auto& line : read_lines(path)) {
        std::istringstream ls(line);
        std::string name, value;
        if (!(ls >> name >> value))
            throw InputError(path.string() + ": malformed line '" + line + "'");
        labels[name] = parse_number<std::size_t>(path.string() + " label of " + name, value);
    }
    return labels;
}

std::vector<std::size_t> labels_for(const RunConfig& cfg, const std::vector<std::string>& names)
{
    const std::size_t classes = cfg.arch.condition_dim;
    if (classes == 0)
        return {};
    if (cfg.labels.empty())
        throw InputError("model has " + std::to_string(classes) + " classes but no labels file is configured");
    const auto table = read_labels(cfg.labels);
    std::vector<std::size_t> out;
    for (const auto& n : names) {
        auto it = table.find(n);
        if (it == table.end())
            throw InputError(cfg.labels.string() + ": no label for " + n);
        if (it->second >= classes)
            throw InputError(cfg.labels.string() + ": label " + std::to_string(it->second) + " of " + n +
                             " exceeds class count " + std::to_string(classes));
        out.push_back(it->second);
    }
    return out;
}

std::vector<double> condition_for(const VaeNetwork& net, const std::optional<std::size_t>& label)
{
    const std::size_t classes = net.params().arch.condition_dim;
    if (classes == 0) {
        if (label)
            throw InputError("a label was given but the model is unconditional");
        return {};
    }
    if (!label)
        throw InputError("conditional model: a label is required");
    return one_hot(*label, classes);
}

Vec3 centroid(std::span<const Vec3> p)
{
    Vec3 c = Vec3::Zero();
    for (const auto& v : p)
        c += v;
    return p.empty() ? c : Vec3(c / static_cast<double>(p.size()));
}

double mean_distance_aligned(std::span<const Vec3> a, std::span<const Vec3> b)
{
    const Vec3 shift = centroid(b) - centroid(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] + shift - b[i]).norm();
    return s / static_cast<double>(a.size());
}

std::vector<std::string> check_connectivity(const Mesh& base, const std::vector<fs::path>& files,
                                            std::vector<Mesh>& meshes)
{
    std::vector<std::string> problems;
    for (const auto& f : files) {
        Mesh m;
        try {
            m = read_obj(f);
        } catch (const InputError& e) {
            problems.push_back(e.what());
            continue;
        }
        auto report = validate_same_connectivity(base, m);
        if (!report.ok)
            problems.push_back(f.filename().string() + ": " + report.message);
        meshes.push_back(std::move(m));
    }
    return problems;
}

std::string join_problems(const std::string& head, const std::vector<std::string>& problems)
{
    std::string msg = head;
    for (const auto& p : problems)
        msg += "\n  " + p;
    return msg;
}

bool segments_cross(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c,
                    const std::array<double, 2>& d)
{
    auto orient = [](const std::array<double, 2>& p, const std::array<double, 2>& q, const std::array<double, 2>& r) {
        const double v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        return (v > 0) - (v < 0);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

} // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::parse(std::istream& in, const fs::path& base_dir)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InputError("config: " + std::string(e.message()) + " at line " + std::to_string(e.line()));
    }

    static const std::map<std::string, std::set<std::string>> known = {
        {"dataset", {"dir", "reference", "labels"}},
        {"hierarchy", {"levels", "lambda", "lambda_mode"}},
        {"model", {"layers", "width", "latent", "order", "classes"}},
        {"train", {"alpha", "learning_rate", "beta1", "beta2", "epsilon", "l2", "epochs", "batch_size", "seed"}},
        {"output", {"dir"}},
    };

    RunConfig cfg;
    bool have_dir = false, have_ref = false;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw InputError("config: value '" + section + "' outside any section");
        auto ks = known.find(section);
        if (ks == known.end())
            throw InputError("config: unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            if (!ks->second.contains(key))
                throw InputError("config: unknown key '" + full + "'");
            const std::string v = trim(node.get_value<std::string>());
            if (section == "dataset") {
                if (key == "dir") {
                    cfg.dataset_dir = resolve(base_dir, v);
                    have_dir = true;
                } else if (key == "reference") {
                    cfg.reference = v;
                    have_ref = true;
                } else {
                    cfg.labels = v; // resolved against the dataset dir below
                }
            } else if (section == "hierarchy") {
                if (key == "levels")
                    cfg.levels = parse_number<std::size_t>(full, v);
                else if (key == "lambda")
                    cfg.lambda = parse_number<double>(full, v);
                else if (v == "absolute")
                    cfg.lambda_mode = LambdaMode::absolute;
                else if (v == "bbox")
                    cfg.lambda_mode = LambdaMode::bbox;
                else
                    throw InputError("config: " + full + ": expected 'absolute' or 'bbox', got '" + v + "'");
            } else if (section == "model") {
                if (key == "layers")
                    cfg.arch.layers = v;
                else if (key == "width")
                    cfg.arch.width = parse_number<std::size_t>(full, v);
                else if (key == "latent")
                    cfg.arch.latent = parse_number<std::size_t>(full, v);
                else if (key == "order")
                    cfg.arch.order = parse_number<std::size_t>(full, v);
                else
                    cfg.arch.condition_dim = parse_number<std::size_t>(full, v);
            } else if (section == "train") {
                auto& t = cfg.train;
                if (key == "epochs")
                    t.epochs = parse_number<std::size_t>(full, v);
                else if (key == "batch_size")
                    t.batch_size = parse_number<std::size_t>(full, v);
                else if (key == "seed")
                    t.seed = parse_number<std::uint64_t>(full, v);
                else {
                    const double d = parse_number<double>(full, v);
                    if (key == "alpha")
                        t.alpha = d;
                    else if (key == "learning_rate")
                        t.learning_rate = d;
                    else if (key == "beta1")
                        t.beta1 = d;
                    else if (key == "beta2")
                        t.beta2 = d;
                    else if (key == "epsilon")
                        t.epsilon = d;
                    else
                        t.l2 = d;
                }
            } else {
                cfg.output_dir = resolve(base_dir, v);
            }
        }
    }

    if (!have_dir)
        throw InputError("config: dataset.dir is required");
    if (!have_ref)
        throw InputError("config: dataset.reference is required");
    if (!fs::is_directory(cfg.dataset_dir))
        throw InputError("config: dataset directory " + cfg.dataset_dir.string() + " does not exist");
    if (!fs::is_regular_file(cfg.dataset_dir / cfg.reference))
        throw InputError("config: reference mesh " + (cfg.dataset_dir / cfg.reference).string() + " does not exist");
    if (!cfg.labels.empty()) {
        cfg.labels = resolve(cfg.dataset_dir, cfg.labels.string());
        if (!fs::is_regular_file(cfg.labels))
            throw InputError("config: labels file " + cfg.labels.string() + " does not exist");
    }
    if (cfg.output_dir.is_relative())
        cfg.output_dir = base_dir / cfg.output_dir;
    if (cfg.levels == 0)
        throw InputError("config: hierarchy.levels must be at least 1");
    if (!(cfg.lambda >= 0.0))
        throw InputError("config: hierarchy.lambda must be non-negative");
    if (!(cfg.train.alpha >= 0.0))
        throw InputError("config: train.alpha must be non-negative");
    if (!(cfg.train.learning_rate >= 0.0))
        throw InputError("config: train.learning_rate must be non-negative");
    cfg.arch.validate(cfg.levels);
    return cfg;
}

RunConfig RunConfig::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config " + path.string());
    try {
        return parse(in, path.parent_path().empty() ? fs::path(".") : path.parent_path());
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

double RunConfig::effective_lambda(const Mesh& reference_mesh) const
{
    if (lambda_mode == LambdaMode::absolute)
        return lambda;
    return lambda * bounding_box_diagonal(reference_mesh.positions);
}

fs::path hierarchy_dir(const RunConfig& cfg) { return cfg.output_dir / "hierarchy"; }
fs::path features_path(const RunConfig& cfg) { return cfg.output_dir / "features.bin"; }
fs::path shape_list_path(const RunConfig& cfg) { return cfg.output_dir / "shapes.txt"; }
fs::path checkpoint_path(const RunConfig& cfg) { return cfg.output_dir / "model.ckpt"; }
fs::path loss_log_path(const RunConfig& cfg) { return cfg.output_dir / "loss.tsv"; }

std::vector<fs::path> dataset_files(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw InputError("dataset directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".obj")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw InputError("no .obj files in " + dir.string());
    return files;
}

// ---------------------------------------------------------------------------
// Commands

Hierarchy cmd_hierarchy(const RunConfig& cfg, std::ostream& log)
{
    const Mesh mesh = read_obj(cfg.dataset_dir / cfg.reference);
    Hierarchy h = build_hierarchy(mesh, cfg.levels, cfg.effective_lambda(mesh));
    fs::create_directories(cfg.output_dir);
    save_hierarchy(hierarchy_dir(cfg), h);
    for (std::size_t k = 0; k < h.levels.size(); ++k)
        log << (k ? " → " : "") << h.levels[k].mesh.vertex_count();
    log << "\nhierarchy " << to_hex(hierarchy_hash(h)) << '\n';
    return h;
}

FeatureSet cmd_features(const RunConfig& cfg, std::ostream& log)
{
    const Mesh base = read_obj(cfg.dataset_dir / cfg.reference);
    const auto files = dataset_files(cfg.dataset_dir);
    std::vector<Mesh> meshes;
    const auto problems = check_connectivity(base, files, meshes);
    if (!problems.empty())
        throw InputError(join_problems("connectivity differs from reference " + cfg.reference + ":", problems));

    const Adjacency adj = build_adjacency(base);
    FeatureSet set = encode_features(base, meshes, adj);
    set.reference = cfg.reference;
    fs::create_directories(cfg.output_dir);
    save_features(features_path(cfg), set);
    std::string names;
    for (const auto& f : files)
        names += f.filename().string() + '\n';
    write_text(shape_list_path(cfg), names);

    std::array<double, feature_dim> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& s : set.shapes) {
        const DenseMatrix raw = set.scale.invert(s);
        for (std::size_t c = 0; c < feature_dim; ++c) {
            lo[c] = std::min(lo[c], raw.col(static_cast<Eigen::Index>(c)).minCoeff());
            hi[c] = std::max(hi[c], raw.col(static_cast<Eigen::Index>(c)).maxCoeff());
        }
    }
    static const char* column_names[feature_dim] = {"w1", "w2", "w3", "s11", "s12", "s13", "s22", "s23", "s33"};
    log << set.shapes.size() << " shapes, " << set.vertex_count() << " vertices\n";
    for (std::size_t c = 0; c < feature_dim; ++c)
        log << column_names[c] << "\t[" << lo[c] << ", " << hi[c] << "]\n";
    return set;
}

Model Model::load(const RunConfig& cfg)
{
    Hierarchy h = load_hierarchy(hierarchy_dir(cfg));
    auto ck = load_checkpoint(checkpoint_path(cfg), hierarchy_hash(h));
    FeatureSet features = load_features(features_path(cfg));
    auto names = read_lines(shape_list_path(cfg));
    if (names.size() != features.shapes.size())
        throw InputError(shape_list_path(cfg).string() + " lists " + std::to_string(names.size()) +
                         " shapes, feature file has " + std::to_string(features.shapes.size()));
    if (features.vertex_count() != h.levels[0].mesh.vertex_count())
        throw InputError("feature file and hierarchy disagree on the vertex count");
    VaeNetwork net(h, std::move(ck.params));
    return Model{std::move(h), std::move(features), std::move(names), std::move(net)};
}

std::vector<Vec3> Model::positions(const DenseMatrix& scaled) const
{
    return reconstruct_positions(base(), decode_features(scaled, features.scale), adjacency());
}

std::vector<Vec3> Model::decode_positions(const Eigen::VectorXd& z, std::span<const double> condition) const
{
    return positions(network.decode(z, condition));
}

TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log)
{
    const Hierarchy h = load_hierarchy(hierarchy_dir(cfg));
    const FeatureSet features = load_features(features_path(cfg));
    const auto names = read_lines(shape_list_path(cfg));
    if (names.size() != features.shapes.size())
        throw InputError(shape_list_path(cfg).string() + " does not match the feature file");
    const auto labels = labels_for(cfg, names);

    std::vector<Example> examples(features.shapes.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        examples[i].features = &features.shapes[i];
        if (!labels.empty())
            examples[i].condition = one_hot(labels[i], cfg.arch.condition_dim);
    }
    const std::vector<Eigen::VectorXd> zero(examples.size(),
                                            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.arch.latent)));
    auto evaluate = [&](VaeParams params) {
        VaeNetwork net(h, std::move(params));
        return net.loss_and_gradient(examples, zero, cfg.train.alpha, cfg.train.l2, nullptr).total();
    };

    TrainSummary summary;
    summary.initial_loss = evaluate(build_model(h, cfg.arch, cfg.train.seed));

    fs::create_directories(cfg.output_dir);
    std::ofstream loss_out(loss_log_path(cfg));
    if (!loss_out)
        throw InputError("cannot write " + loss_log_path(cfg).string());
    loss_out << std::setprecision(17);
    auto result = train(features, h, cfg.arch, cfg.train, labels, [&](const EpochRecord& r) {
        loss_out << r.epoch << '\t' << r.reconstruction << '\t' << r.kl << '\t' << r.total << '\n';
    });
    loss_out.flush();
    summary.log = result.log;
    summary.final_loss = evaluate(result.params);
    if (!std::isfinite(summary.final_loss))
        throw NumericalError("final loss is not finite");
    save_checkpoint(checkpoint_path(cfg), result.params, hierarchy_hash(h));

    log << "parameters " << count_parameters(result.params) << '\n';
    log << "initial loss " << summary.initial_loss << '\n';
    log << "final loss " << summary.final_loss << '\n';
    return summary;
}

std::vector<Neighbor> cmd_generate(const RunConfig& cfg, const GenerateOptions& opts, std::ostream& log)
{
    const Model model = Model::load(cfg);
    const auto cond = condition_for(model.network, opts.label);

    std::vector<std::vector<Vec3>> training;
    for (const auto& n : model.shape_names) {
        Mesh m = read_obj(cfg.dataset_dir / n);
        if (m.vertex_count() != model.base().vertex_count())
            throw InputError(n + ": vertex count differs from the reference");
        training.push_back(std::move(m.positions));
    }

    const fs::path dir = cfg.output_dir / "generate";
    fs::create_directories(dir);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto latent = static_cast<Eigen::Index>(model.network.params().arch.latent);

    std::vector<Neighbor> report;
    std::ostringstream tsv;
    tsv << std::setprecision(17);
    for (std::size_t i = 0; i < opts.count; ++i) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(latent);
        if (!opts.mean)
            for (Eigen::Index d = 0; d < latent; ++d)
                z[d] = normal(rng);
        Mesh out = model.base();
        out.positions = model.decode_positions(z, cond);
        const std::string name = frame_name("gen", i);
        save_obj(dir / name, out);

        Neighbor nb{name, "", std::numeric_limits<double>::infinity()};
        for (std::size_t k = 0; k < training.size(); ++k) {
            const double d = mean_distance_aligned(out.positions, training[k]);
            if (d < nb.distance) {
                nb.distance = d;
                nb.nearest = model.shape_names[k];
            }
        }
        tsv << nb.generated << '\t' << nb.nearest << '\t' << nb.distance << '\n';
        report.push_back(std::move(nb));
    }
    write_text(dir / "nearest.tsv", tsv.str());
    log << "wrote " << opts.count << " shapes to " << dir.string() << '\n';
    return report;
}

std::vector<fs::path> cmd_interpolate(const RunConfig& cfg, const InterpolateOptions& opts, std::ostream& log)
{
    if (opts.steps < 2)
        throw InputError("interpolation needs at least 2 steps");
    const Model model = Model::load(cfg);
    const auto cond = condition_for(model.network, opts.label);

    auto find = [&](const std::string& key) -> std::size_t {
        auto it = std::find(model.shape_names.begin(), model.shape_names.end(), key);
        if (it != model.shape_names.end())
            return static_cast<std::size_t>(it - model.shape_names.begin());
        std::size_t idx = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
        if (ec != std::errc() || ptr != key.data() + key.size() || idx >= model.shape_names.size())
            throw InputError("no shape '" + key + "' in the dataset");
        return idx;
    };
    const std::size_t a = find(opts.from), b = find(opts.to);
    const Eigen::VectorXd mu_a = model.network.encode(model.features.shapes[a], cond).mean;
    const Eigen::VectorXd mu_b = model.network.encode(model.features.shapes[b], cond).mean;

    const fs::path dir = cfg.output_dir / "interpolate";
    fs::create_directories(dir);
    std::vector<fs::path> written;
    for (std::size_t k = 0; k < opts.steps; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(opts.steps - 1);
        // std::lerp is exact at both ends and constant when A = B
        Eigen::VectorXd z(mu_a.size());
        for (Eigen::Index d = 0; d < z.size(); ++d)
            z[d] = std::lerp(mu_a[d], mu_b[d], t);
        Mesh out = model.base();
        out.positions = model.decode_positions(z, cond);
        written.push_back(dir / frame_name("frame", k));
        save_obj(written.back(), out);
    }
    log << "wrote " << opts.steps << " frames from " << model.shape_names[a] << " to " << model.shape_names[b]
        << '\n';
    return written;
}

EmbeddingResult embed_codes(const std::vector<Eigen::VectorXd>& means)
{
    if (means.size() < 2)
        throw InputError("embedding needs at least 2 shapes");
    const Eigen::Index dims = means[0].size();
    if (dims < 2)
        throw InputError("embedding needs a latent space of at least 2 dimensions");
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(dims);
    for (const auto& m : means)
        avg += m;
    avg /= static_cast<double>(means.size());
    EmbeddingResult r;
    r.variances.assign(static_cast<std::size_t>(dims), 0.0);
    for (const auto& m : means)
        for (Eigen::Index d = 0; d < dims; ++d)
            r.variances[static_cast<std::size_t>(d)] += (m[d] - avg[d]) * (m[d] - avg[d]);
    for (auto& v : r.variances)
        v /= static_cast<double>(means.size());

    std::vector<std::size_t> idx(r.variances.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t p, std::size_t q) { return r.variances[p] > r.variances[q]; });
    r.dimensions = {idx[0], idx[1]};
    for (const auto& m : means)
        r.coordinates.push_back({m[static_cast<Eigen::Index>(idx[0])], m[static_cast<Eigen::Index>(idx[1])]});

    const std::size_t n = r.coordinates.size();
    if (n >= 4)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 2; j < n; ++j) {
                if (i == 0 && j == n - 1)
                    continue; // adjacent through the closing segment
                if (segments_cross(r.coordinates[i], r.coordinates[(i + 1) % n], r.coordinates[j],
                                   r.coordinates[(j + 1) % n]))
                    ++r.self_intersections;
            }
    return r;
}

EmbeddingResult cmd_embed(const RunConfig& cfg, std::ostream& log)
{
    const Model model = Model::load(cfg);
    const auto labels = labels_for(cfg, model.shape_names);
    std::vector<Eigen::VectorXd> means;
    for (std::size_t i = 0; i < model.features.shapes.size(); ++i) {
        std::vector<double> cond;
        if (!labels.empty())
            cond = one_hot(labels[i], cfg.arch.condition_dim);
        means.push_back(model.network.encode(model.features.shapes[i], cond).mean);
    }
    EmbeddingResult r = embed_codes(means);
    r.names = model.shape_names;

    std::ostringstream tsv;
    tsv << std::setprecision(17);
    tsv << "# dimensions\t" << r.dimensions[0] << '\t' << r.dimensions[1] << '\n';
    for (std::size_t i = 0; i < r.names.size(); ++i)
        tsv << r.names[i] << '\t' << r.coordinates[i][0] << '\t' << r.coordinates[i][1] << '\n';
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "embedding.tsv", tsv.str());
    log << "dimensions " << r.dimensions[0] << ' ' << r.dimensions[1] << " (variance "
        << r.variances[r.dimensions[0]] << ", " << r.variances[r.dimensions[1]] << ")\n";
    log << "closed polyline self-intersections " << r.self_intersections << '\n';
    return r;
}

double rms_distance(std::span<const Vec3> a, std::span<const Vec3> b)
{
    if (a.size() != b.size() || a.empty())
        throw InputError("rms: point sets differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]).squaredNorm();
    return std::sqrt(s / static_cast<double>(a.size()));
}

double rms_distance_aligned(std::span<const Vec3> a, std::span<const Vec3> b)
{
    if (a.size() != b.size() || a.empty())
        throw InputError("rms: point sets differ in size");
    const Vec3 shift = centroid(b) - centroid(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] + shift - b[i]).squaredNorm();
    return std::sqrt(s / static_cast<double>(a.size()));
}

EvalReport cmd_eval(const RunConfig& cfg, const std::optional<fs::path>& data_dir, std::ostream& log)
{
    const Model model = Model::load(cfg);
    const auto files = dataset_files(data_dir.value_or(cfg.dataset_dir));
    std::vector<Mesh> meshes;
    const auto problems = check_connectivity(model.base(), files, meshes);
    if (!problems.empty())
        throw InputError(join_problems("connectivity differs from reference " + cfg.reference + ":", problems));

    std::vector<std::string> names;
    for (const auto& f : files)
        names.push_back(f.filename().string());
    const auto labels = labels_for(cfg, names);

    EvalReport report;
    report.bbox_diagonal = bounding_box_diagonal(model.base().positions);
    std::ostringstream tsv;
    tsv << std::setprecision(17);
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        std::vector<double> cond;
        if (!labels.empty())
            cond = one_hot(labels[i], cfg.arch.condition_dim);
        const DenseMatrix x = encode_with_scale(model.base(), meshes[i], model.adjacency(), model.features.scale);
        const auto pos = model.decode_positions(model.network.encode(x, cond).mean, cond);
        EvalRow row{names[i], rms_distance(pos, meshes[i].positions), rms_distance_aligned(pos, meshes[i].positions)};
        tsv << row.name << '\t' << row.rms << '\t' << row.rms_aligned << '\n';
        report.mean_rms += row.rms;
        report.mean_rms_aligned += row.rms_aligned;
        report.rows.push_back(std::move(row));
    }
    report.mean_rms /= static_cast<double>(report.rows.size());
    report.mean_rms_aligned /= static_cast<double>(report.rows.size());
    tsv << "mean\t" << report.mean_rms << '\t' << report.mean_rms_aligned << '\n';
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "eval.tsv", tsv.str());
    log << "mean RMS " << report.mean_rms << " (aligned " << report.mean_rms_aligned << "), bbox diagonal "
        << report.bbox_diagonal << '\n';
    return report;
}

} // namespace meshvae::apps
