#include "mirror_splat/cli.hpp"

int main(int argc, char** argv) { return mirror_splat::run_cli(argc, argv); }
