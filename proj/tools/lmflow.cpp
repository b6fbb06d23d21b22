#include <iostream>

#include "lmflow/cli.hpp"

int main(int argc, char** argv) { return lmflow::cli::run(argc, argv, std::cout, std::cerr); }
