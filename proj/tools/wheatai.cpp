#include "wheatai/gateway/cli.hpp"

int main(int argc, char** argv) {
    return wheatai::gateway::run_cli(argc, argv);
}
