#include <iostream>

#include "qsg/cli.hpp"

int main(int argc, char** argv) { return qsg::cli::run(argc, argv, std::cout, std::cerr); }
