// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "dscls/cli.hpp"

int main(int argc, char** argv) { return dscls::run_cli(argc, argv, std::cout, std::cerr); }
