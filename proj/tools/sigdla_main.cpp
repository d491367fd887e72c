#include "sigdla/cli.hpp"

int main(int argc, char** argv) { return sigdla::cli::run_cli(argc, argv); }
