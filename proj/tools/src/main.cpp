#include <iostream>
#include <string>
#include <vector>

#include "neuroexc/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return neuroexc::cli_dispatch(args, std::cout, std::cerr);
}
