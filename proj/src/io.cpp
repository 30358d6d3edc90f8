#include "mm/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mm {

static_assert(std::endian::native == std::endian::little,
              "PMF1 I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw FormatError("PMF1: truncated header");
    return v;
}

}  // namespace

void write_pmf1(std::ostream& os, const Field& f) {
    const Grid& g = f.grid();
    os.write("PMF1", 4);
    put<std::uint32_t>(os, g.Nt);
    for (int i = 0; i < 3; ++i) put<std::uint32_t>(os, g.Nx);
    put<std::uint32_t>(os, f.components());
    put<double>(os, g.L);
    put<double>(os, g.T);
    os.write(reinterpret_cast<const char*>(f.data().data()),
             std::streamsize(f.data().size() * sizeof(double)));
    if (!os) throw FormatError("PMF1: write failed");
}

Field read_pmf1(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PMF1", 4) != 0) throw FormatError("PMF1: bad magic");
    const auto nt = get<std::uint32_t>(is);
    const auto n0 = get<std::uint32_t>(is);
    const auto n1 = get<std::uint32_t>(is);
    const auto n2 = get<std::uint32_t>(is);
    const auto nc = get<std::uint32_t>(is);
    if (n0 != n1 || n1 != n2) throw FormatError("PMF1: only cubic grids are supported");
    if (nc != 1 && nc != 3) throw FormatError("PMF1: components must be 1 or 3");
    Grid g;
    g.Nt = int(nt);
    g.Nx = int(n0);
    g.L = get<double>(is);
    g.T = get<double>(is);
    try {
        g.validate();
    } catch (const DomainError& e) {
        throw FormatError(std::string("PMF1: ") + e.what());
    }
    Field f(g, int(nc));
    is.read(reinterpret_cast<char*>(f.data().data()),
            std::streamsize(f.data().size() * sizeof(double)));
    if (!is) throw FormatError("PMF1: truncated payload");
    return f;
}

void save_pmf1(const std::string& path, const Field& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("PMF1: cannot open " + path + " for writing");
    write_pmf1(os, f);
}

Field load_pmf1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("PMF1: cannot open " + path);
    return read_pmf1(is);
}

void save_state(const std::string& path, const Field& u, const Field& w) {
    require_components(u, 3, "save_state");
    require_same_shape(u, w, "save_state");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("PMF1: cannot open " + path + " for writing");
    write_pmf1(os, u);
    write_pmf1(os, w);
}

StateFields load_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("PMF1: cannot open " + path);
    StateFields s{read_pmf1(is), Field()};
    if (is.peek() == std::char_traits<char>::eof()) throw FormatError("PMF1: " + path + " holds no omega record");
    s.w = read_pmf1(is);
    if (s.u.grid() != s.w.grid() || s.w.components() != 3 || s.u.components() != 3)
        throw FormatError("PMF1: state records differ in shape");
    return s;
}

}  // namespace mm
