#include <iostream>

#include "lob_lab/cli.hpp"

int main(int argc, char** argv) { return lob_lab::cli::main_entry(argc, argv, std::cout, std::cerr); }
