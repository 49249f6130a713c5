#pragma once

#include <string>
#include <vector>

#include "langevin/model.hpp"

namespace langevin {

// Channel ensembles on disk. Both formats store each n_r x n_u complex matrix
// row-major with real and imaginary parts interleaved:
//   re(0,0) im(0,0) re(0,1) im(0,1) ... re(n_r-1,n_u-1) im(n_r-1,n_u-1)
//
// Binary (little-endian):
//   8 bytes  magic "LGVCHAN1"
//   u32      n_r
//   u32      n_u
//   u64      number of channels
//   f64[]    count * n_r * n_u * 2 values
//
// CSV: header line "n_r,n_u", one line with the two sizes, then one line per
// channel holding its 2 * n_r * n_u values (17 significant digits).

void write_channels_binary(const std::string& path, const std::vector<ComplexMatrix>& channels);
std::vector<ComplexMatrix> read_channels_binary(const std::string& path);

void write_channels_csv(const std::string& path, const std::vector<ComplexMatrix>& channels);
std::vector<ComplexMatrix> read_channels_csv(const std::string& path);

}  // namespace langevin
