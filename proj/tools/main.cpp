// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "rqvqa/cli.hpp"

int main(int argc, char** argv) { return rqvqa::cli::run(argc, argv, std::cout, std::cerr); }
