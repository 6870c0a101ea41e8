#include "ratiopt/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return ratiopt::cli::run(argc, argv, std::cout, std::cerr); }
