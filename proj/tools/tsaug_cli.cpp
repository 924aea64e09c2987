#include <iostream>

#include "tsaug/cli.hpp"

int main(int argc, char** argv) { return tsaug::run_cli(argc, argv, std::cout, std::cerr); }
