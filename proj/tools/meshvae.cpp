#include "meshvae/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return meshvae::run_cli(argc, argv, std::cout, std::cerr);
}
