#include <iostream>

#include "slotnoise/cli.hpp"

int main(int argc, char** argv) { return slotnoise::run_cli(argc, argv, std::cout, std::cerr); }
