#include <iostream>
#include <string>
#include <vector>

#include "formflood/commands.hpp"

int main(int argc, char** argv) {
    return formflood::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                                   std::cerr);
}
