// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv)
{
    return hif8::cli::run(argc, argv, std::cout, std::cerr);
}
