#include "cli.hpp"

int main(int argc, char** argv) { return fmprior::cli::run(argc, argv); }
