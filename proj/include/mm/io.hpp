#pragma once

#include <iosfwd>
#include <string>

#include "mm/core.hpp"

namespace mm {

// PMF1 binary layout: "PMF1", u32 Nt, Nx, Nx, Nx, components, f64 L, f64 T,
// then the values as little-endian f64 in the in-memory order [t][c][z][y][x].
void write_pmf1(std::ostream& os, const Field& f);
Field read_pmf1(std::istream& is);
void save_pmf1(const std::string& path, const Field& f);
Field load_pmf1(const std::string& path);

// A state file is two PMF1 records on one grid, u then omega; load_pmf1 on it
// returns u.
struct StateFields {
    Field u, w;
};
void save_state(const std::string& path, const Field& u, const Field& w);
StateFields load_state(const std::string& path);

}  // namespace mm
