#include <iostream>

#include "heat/cli.hpp"

int main(int argc, char** argv) { return heat::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
