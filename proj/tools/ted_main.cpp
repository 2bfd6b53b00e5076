#include <iostream>

#include "ted/cli.hpp"

int main(int argc, char** argv) { return ted::run_cli(argc, argv, std::cout, std::cerr); }
