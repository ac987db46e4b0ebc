#include <iostream>

#include "qillum/cli.hpp"

int main(int argc, char** argv) { return qillum::run_cli(argc, argv, std::cout, std::cerr); }
