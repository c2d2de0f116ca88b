#include <iostream>

#include "pssmp/cli.hpp"

int main(int argc, char** argv) { return pssmp::cli::run(argc, argv, std::cout, std::cerr); }
