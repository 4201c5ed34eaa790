#include <iostream>

#include "bpvae/cli.hpp"

int main(int argc, char** argv) { return bpvae::cli::run(argc, argv, std::cout, std::cerr); }
