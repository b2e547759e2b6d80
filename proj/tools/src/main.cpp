#include <iostream>

#include "xmusim_cli/cli.hpp"

int main(int argc, char** argv) { return xmusim::cli::run(argc, argv, std::cout, std::cerr); }
