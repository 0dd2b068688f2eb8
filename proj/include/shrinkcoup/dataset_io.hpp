#pragma once

// Dataset files.
//
// CSV: header `y,x1,...,xp`, one observation per row.
// Binary: little-endian uint64 n, uint64 p, then y (n doubles), then X
// row-major (n*p doubles), IEEE-754.

#include <string>

#include "shrinkcoup/model.hpp"

namespace shrinkcoup {

Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& d, const std::string& path);

Dataset read_dataset_binary(const std::string& path);
void write_dataset_binary(const Dataset& d, const std::string& path);

/// Dispatches on the extension: `.bin` is binary, anything else CSV.
Dataset load_dataset(const std::string& path);

}  // namespace shrinkcoup
