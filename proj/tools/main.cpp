#include "liediff/cli.hpp"

int main(int argc, char** argv) { return liediff::dispatch(argc, argv); }
