#include "cli.hpp"

int main(int argc, char** argv) { return metabayes::cli::run(argc, argv); }
