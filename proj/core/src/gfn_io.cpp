#include "fblab/gfn_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace fblab {

namespace {

using nlohmann::json;

std::string strip_suffix(const std::string& stem) {
  const std::string suffix = ".gfn";
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return stem.substr(0, stem.size() - suffix.size());
  }
  return stem;
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
  return r;
}

std::string role_name(FieldRole role) {
  return role == FieldRole::Nonnegative ? "nonnegative" : "signed";
}

FieldRole role_from_name(const std::string& name, const std::string& path) {
  if (name == "nonnegative") return FieldRole::Nonnegative;
  if (name == "signed") return FieldRole::Signed;
  throw ValidationError("read_gfn: unknown role \"" + name + "\" in " + path);
}

}  // namespace

void write_gfn(const std::string& stem, const GridFunction& u) {
  std::string base = strip_suffix(stem);
  const Grid& g = u.grid;

  json meta;
  meta["format"] = "gfn";
  meta["version"] = 1;
  meta["dim"] = g.dim;
  meta["h"] = g.h;
  json bounds = json::array();
  for (int d = 0; d < g.dim; ++d) {
    bounds.push_back({g.bounds[d].lo, g.bounds[d].hi});
  }
  meta["bounds"] = bounds;
  json shape = json::array();
  for (int d = 0; d < g.dim; ++d) shape.push_back(g.shape[d]);
  meta["shape"] = shape;
  meta["role"] = role_name(u.role);

  std::ofstream jf(base + ".gfn.json", std::ios::trunc);
  if (!jf) throw ValidationError("write_gfn: cannot open " + base + ".gfn.json");
  jf << meta.dump(2) << "\n";
  jf.close();
  if (!jf) throw ValidationError("write_gfn: failed writing " + base + ".gfn.json");

  std::ofstream bf(base + ".gfn", std::ios::binary | std::ios::trunc);
  if (!bf) throw ValidationError("write_gfn: cannot open " + base + ".gfn");
  for (double v : u.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = to_le(bits);
    bf.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  bf.close();
  if (!bf) throw ValidationError("write_gfn: failed writing " + base + ".gfn");
}

GridFunction read_gfn(const std::string& stem) {
  std::string base = strip_suffix(stem);
  std::string jpath = base + ".gfn.json";
  std::ifstream jf(jpath);
  if (!jf) throw ValidationError("read_gfn: cannot open " + jpath);
  json meta;
  try {
    jf >> meta;
  } catch (const json::exception& e) {
    throw ValidationError("read_gfn: invalid JSON in " + jpath + ": " + e.what());
  }
  if (meta.value("format", "") != "gfn") {
    throw ValidationError("read_gfn: " + jpath + " is not a gfn sidecar");
  }

  int dim = meta.at("dim").get<int>();
  double h = meta.at("h").get<double>();
  std::vector<Interval> bounds;
  for (const auto& iv : meta.at("bounds")) {
    bounds.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  }
  if (static_cast<int>(bounds.size()) != dim) {
    throw ValidationError("read_gfn: bounds/dim mismatch in " + jpath);
  }
  Grid grid = make_grid(bounds, h);
  for (int d = 0; d < dim; ++d) {
    if (meta.at("shape").at(d).get<int>() != grid.shape[d]) {
      throw ValidationError("read_gfn: shape mismatch on axis " + std::to_string(d) +
                            " in " + jpath);
    }
  }

  GridFunction u;
  u.grid = grid;
  u.role = role_from_name(meta.at("role").get<std::string>(), jpath);
  u.values.resize(grid.node_count());

  std::string bpath = base + ".gfn";
  std::ifstream bf(bpath, std::ios::binary);
  if (!bf) throw ValidationError("read_gfn: cannot open " + bpath);
  for (double& v : u.values) {
    std::uint64_t bits = 0;
    bf.read(reinterpret_cast<char*>(&bits), sizeof bits);
    if (!bf) throw ValidationError("read_gfn: truncated data in " + bpath);
    bits = to_le(bits);
    std::memcpy(&v, &bits, sizeof v);
  }
  char extra;
  if (bf.read(&extra, 1)) {
    throw ValidationError("read_gfn: trailing data in " + bpath);
  }
  return u;
}

}  // namespace fblab
