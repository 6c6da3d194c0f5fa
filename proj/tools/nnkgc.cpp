#include <iostream>

#include "nnkgc/cli/commands.hpp"

int main(int argc, char** argv) { return nnkgc::cli::run_cli(argc, argv, std::cout, std::cerr); }
