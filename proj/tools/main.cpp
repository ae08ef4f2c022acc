#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return gfrbess::cli::run_cli(argc, argv, std::cout, std::cerr); }
