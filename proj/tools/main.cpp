#include "ramlc/cli.hpp"

int main(int argc, char** argv) { return ramlc::dispatch(argc, argv); }
