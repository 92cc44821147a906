#include <iostream>

#include "distill/cli.hpp"

int main(int argc, char** argv) { return distill::cli::run(argc, argv, std::cout, std::cerr); }
