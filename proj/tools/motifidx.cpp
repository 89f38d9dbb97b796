#include "motifidx/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return motifidx::gateway::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
