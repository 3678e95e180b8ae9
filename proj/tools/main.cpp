#include <iostream>

#include "hardhat/cli.hpp"

int main(int argc, char** argv) { return hardhat::cli::run(argc, argv, std::cout, std::cerr); }
