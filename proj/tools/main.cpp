#include "hmatch/cli.hpp"

int main(int argc, char** argv) { return hmatch::cli::run(argc, argv); }
