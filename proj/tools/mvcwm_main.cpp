#include "mvcwm/cli.hpp"

int main(int argc, char** argv) {
    return mvcwm::run_cli(argc, argv);
}
