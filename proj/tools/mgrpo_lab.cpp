#include <iostream>

#include "mgrpo/cli.hpp"

int main(int argc, char** argv) { return mgrpo::run_cli(argc, argv, std::cout, std::cerr); }
