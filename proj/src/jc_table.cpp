#include "odf/jc_table.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "odf/serialize.hpp"

namespace odf::jc {

// edge e: axis a = e/4, k = e%4 encodes the two fixed coordinates
//   x-edges: k = y + 2z, y-edges: k = x + 2z, z-edges: k = x + 2y
const std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x-edges, k = y + 2z
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y-edges, k = x + 2z
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z-edges, k = x + 2y
}};

// faces 2*axis+side, boundary edges in cyclic order around the face
const std::array<std::array<int, 4>, 6> kFaceEdges = {{
    {4, 10, 6, 8},   // x = 0
    {5, 11, 7, 9},   // x = 1
    {0, 9, 2, 8},    // y = 0
    {1, 11, 3, 10},  // y = 1
    {0, 5, 1, 4},    // z = 0
    {2, 7, 3, 6},    // z = 1
}};

Vec3 corner_coords(int corner) {
  return Vec3{double(corner & 1), double((corner >> 1) & 1), double((corner >> 2) & 1)};
}

static int corner_of(int x, int y, int z) { return x + 2 * y + 4 * z; }

static int edge_from_corners(int a, int b) {
  if (a > b) std::swap(a, b);
  for (int e = 0; e < 12; ++e) {
    if (kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) return e;
  }
  return -1;
}

const std::vector<std::array<int, 12>>& edge_rotations() {
  static const std::vector<std::array<int, 12>> rotations = [] {
    // quarter turns about x and y generate the full rotation group
    auto rot_x = [](int c) {
      int x = c & 1, y = (c >> 1) & 1, z = (c >> 2) & 1;
      return corner_of(x, 1 - z, y);
    };
    auto rot_y = [](int c) {
      int x = c & 1, y = (c >> 1) & 1, z = (c >> 2) & 1;
      return corner_of(z, y, 1 - x);
    };
    std::set<std::array<int, 8>> seen;
    std::vector<std::array<int, 8>> queue;
    std::array<int, 8> identity;
    for (int i = 0; i < 8; ++i) identity[i] = i;
    seen.insert(identity);
    queue.push_back(identity);
    for (size_t head = 0; head < queue.size(); ++head) {
      std::array<int, 8> p = queue[head];
      for (int gen = 0; gen < 2; ++gen) {
        std::array<int, 8> q;
        for (int i = 0; i < 8; ++i) q[i] = gen == 0 ? rot_x(p[i]) : rot_y(p[i]);
        if (seen.insert(q).second) queue.push_back(q);
      }
    }
    std::vector<std::array<int, 12>> out;
    for (const auto& p : queue) {
      std::array<int, 12> ep;
      for (int e = 0; e < 12; ++e) {
        ep[e] = edge_from_corners(p[kEdgeCorners[e][0]], p[kEdgeCorners[e][1]]);
      }
      out.push_back(ep);
    }
    if (out.size() != 24) throw std::logic_error("cube rotation group must have 24 elements");
    return out;
  }();
  return rotations;
}

namespace {

// One face's possible chord sets given its crossed edges in cyclic order.
struct FaceOptions {
  std::vector<std::vector<std::pair<int, int>>> choices;  // each choice: chords as edge pairs
};

FaceOptions face_options(const std::array<int, 4>& face, uint16_t mask) {
  std::vector<int> crossed;
  for (int e : face) {
    if (mask & (1u << e)) crossed.push_back(e);
  }
  FaceOptions out;
  switch (crossed.size()) {
    case 0:
    case 1:
      out.choices.push_back({});
      break;
    case 2:
      out.choices.push_back({{crossed[0], crossed[1]}});
      break;
    case 3:
      // one chord, one loose end; three candidate pairings
      out.choices.push_back({{crossed[0], crossed[1]}});
      out.choices.push_back({{crossed[1], crossed[2]}});
      out.choices.push_back({{crossed[0], crossed[2]}});
      break;
    case 4:
      // two chords; only the non-crossing (cyclically adjacent) pairings
      out.choices.push_back({{crossed[0], crossed[1]}, {crossed[2], crossed[3]}});
      out.choices.push_back({{crossed[1], crossed[2]}, {crossed[3], crossed[0]}});
      break;
    default:
      break;
  }
  return out;
}

std::vector<Component> components_from_chords(uint16_t mask,
                                              const std::vector<std::pair<int, int>>& chords) {
  std::array<std::vector<int>, 12> adj;
  for (const auto& [a, b] : chords) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::array<bool, 12> used{};
  std::vector<Component> components;
  // Two cube edges share at most one face, so there are never parallel chords
  // and the walk below is unambiguous.
  auto walk = [&](int start) {
    Component comp;
    int prev = -1, cur = start;
    while (true) {
      comp.edges.push_back(cur);
      used[cur] = true;
      int next = -1;
      for (int nb : adj[cur]) {
        if (nb == prev) continue;
        next = nb;
        break;
      }
      if (next < 0) return comp;  // chain end
      if (next == start) {
        comp.closed = true;
        return comp;
      }
      prev = cur;
      cur = next;
    }
  };
  // open chains first so walks start at their endpoints
  for (int e = 0; e < 12; ++e) {
    if (!used[e] && (mask & (1u << e)) && adj[e].size() == 1) components.push_back(walk(e));
  }
  for (int e = 0; e < 12; ++e) {
    if (!used[e] && (mask & (1u << e)) && adj[e].size() >= 2) components.push_back(walk(e));
  }
  // isolated crossings become single-node components
  for (int e = 0; e < 12; ++e) {
    if (!used[e] && (mask & (1u << e))) {
      components.push_back(Component{{e}, false});
      used[e] = true;
    }
  }
  return components;
}

void canonicalize(std::vector<Component>& components) {
  for (Component& c : components) {
    if (c.edges.size() < 2) continue;
    if (c.closed) {
      // rotate to the minimum edge, orient toward the smaller neighbor
      auto it = std::min_element(c.edges.begin(), c.edges.end());
      std::rotate(c.edges.begin(), it, c.edges.end());
      if (c.edges.size() > 2 && c.edges.back() < c.edges[1]) {
        std::reverse(c.edges.begin() + 1, c.edges.end());
      }
    } else if (c.edges.front() > c.edges.back()) {
      std::reverse(c.edges.begin(), c.edges.end());
    }
  }
  std::sort(components.begin(), components.end(), [](const Component& a, const Component& b) {
    return a.edges < b.edges;
  });
}

std::vector<int> serialize_components(const std::vector<Component>& components) {
  std::vector<int> s;
  for (const Component& c : components) {
    s.push_back(c.closed ? 1 : 0);
    s.push_back(int(c.edges.size()));
    s.insert(s.end(), c.edges.begin(), c.edges.end());
  }
  return s;
}

}  // namespace

std::vector<Component> decompose_canonical(uint16_t mask) {
  std::array<FaceOptions, 6> options;
  size_t combos = 1;
  for (int f = 0; f < 6; ++f) {
    options[f] = face_options(kFaceEdges[f], mask);
    combos *= options[f].choices.size();
  }

  std::vector<Component> best;
  size_t best_components = SIZE_MAX;
  size_t best_chains = SIZE_MAX;
  std::vector<int> best_serial;
  for (size_t combo = 0; combo < combos; ++combo) {
    std::vector<std::pair<int, int>> chords;
    size_t rest = combo;
    for (int f = 0; f < 6; ++f) {
      size_t n = options[f].choices.size();
      const auto& choice = options[f].choices[rest % n];
      rest /= n;
      chords.insert(chords.end(), choice.begin(), choice.end());
    }
    std::vector<Component> comps = components_from_chords(mask, chords);
    canonicalize(comps);
    size_t n_chains = 0;
    for (const Component& c : comps) {
      if (!c.closed && c.edges.size() >= 2) ++n_chains;
    }
    std::vector<int> serial = serialize_components(comps);
    bool better = comps.size() < best_components ||
                  (comps.size() == best_components && n_chains < best_chains) ||
                  (comps.size() == best_components && n_chains == best_chains &&
                   serial < best_serial);
    if (better) {
      best = std::move(comps);
      best_components = best.size();
      best_chains = n_chains;
      best_serial = std::move(serial);
    }
  }
  return best;
}

std::vector<Component> decompose_geometric(uint16_t mask, const std::array<Vec3, 12>& points,
                                           const std::array<int64_t, 12>& global_edge_ids) {
  std::vector<std::pair<int, int>> chords;
  for (int f = 0; f < 6; ++f) {
    FaceOptions options = face_options(kFaceEdges[f], mask);
    if (options.choices.size() <= 1) {
      if (!options.choices.empty()) {
        chords.insert(chords.end(), options.choices[0].begin(), options.choices[0].end());
      }
      continue;
    }
    // pick the choice with minimal total squared chord length; break exact
    // ties on sorted global edge-id pairs so adjacent cubes agree
    size_t best = 0;
    double best_len = 0.0;
    std::vector<std::pair<int64_t, int64_t>> best_ids;
    for (size_t k = 0; k < options.choices.size(); ++k) {
      double len = 0.0;
      std::vector<std::pair<int64_t, int64_t>> ids;
      for (const auto& [a, b] : options.choices[k]) {
        len += norm2(points[a] - points[b]);
        int64_t ga = global_edge_ids[a], gb = global_edge_ids[b];
        ids.emplace_back(std::min(ga, gb), std::max(ga, gb));
      }
      std::sort(ids.begin(), ids.end());
      if (k == 0 || len < best_len || (len == best_len && ids < best_ids)) {
        best = k;
        best_len = len;
        best_ids = std::move(ids);
      }
    }
    chords.insert(chords.end(), options.choices[best].begin(), options.choices[best].end());
  }
  std::vector<Component> comps = components_from_chords(mask, chords);
  canonicalize(comps);
  return comps;
}

std::vector<std::array<uint8_t, 3>> fan_triangles(const std::vector<Component>& components) {
  std::vector<std::array<uint8_t, 3>> triangles;
  for (const Component& c : components) {
    for (size_t i = 1; i + 1 < c.edges.size(); ++i) {
      triangles.push_back({uint8_t(c.edges[0]), uint8_t(c.edges[i]), uint8_t(c.edges[i + 1])});
    }
  }
  return triangles;
}

Table Table::generate() {
  Table table;
  table.entries_.resize(4096);
  for (uint32_t mask = 0; mask < 4096; ++mask) {
    Entry& entry = table.entries_[mask];
    for (int f = 0; f < 6; ++f) {
      int crossed = 0;
      for (int e : kFaceEdges[f]) {
        if (mask & (1u << e)) ++crossed;
      }
      if (crossed >= 3) entry.ambiguous = true;
    }
    std::vector<Component> comps = decompose_canonical(uint16_t(mask));
    for (const Component& c : comps) {
      if (!c.closed && c.edges.size() >= 2) entry.has_chains = true;
    }
    entry.triangles = fan_triangles(comps);
  }
  return table;
}

int Table::rotation_class_count() const {
  const auto& rotations = edge_rotations();
  std::set<uint16_t> canonical;
  for (uint32_t mask = 0; mask < 4096; ++mask) {
    uint16_t best = uint16_t(mask);
    for (const auto& perm : rotations) {
      uint16_t rotated = 0;
      for (int e = 0; e < 12; ++e) {
        if (mask & (1u << e)) rotated |= uint16_t(1u << perm[e]);
      }
      best = std::min(best, rotated);
    }
    canonical.insert(best);
  }
  return int(canonical.size());
}

static constexpr char kTableMagic[4] = {'O', 'D', 'F', 'T'};
static constexpr uint32_t kTableVersion = 1;

void Table::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write JC table: " + path);
  write_magic(out, kTableMagic);
  write_pod<uint32_t>(out, kTableVersion);
  for (const Entry& e : entries_) {
    uint8_t flags = uint8_t((e.ambiguous ? 1 : 0) | (e.has_chains ? 2 : 0));
    write_pod<uint8_t>(out, flags);
    write_pod<uint16_t>(out, uint16_t(e.triangles.size()));
    for (const auto& t : e.triangles) {
      out.write(reinterpret_cast<const char*>(t.data()), 3);
    }
  }
}

Table Table::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open JC table: " + path);
  expect_magic(in, kTableMagic, "ODFT");
  if (read_pod<uint32_t>(in) != kTableVersion) throw std::runtime_error("JC table version mismatch");
  Table table;
  table.entries_.resize(4096);
  for (Entry& e : table.entries_) {
    uint8_t flags = read_pod<uint8_t>(in);
    e.ambiguous = flags & 1;
    e.has_chains = flags & 2;
    uint16_t n = read_pod<uint16_t>(in);
    e.triangles.resize(n);
    for (auto& t : e.triangles) {
      in.read(reinterpret_cast<char*>(t.data()), 3);
    }
  }
  if (!in) throw std::runtime_error("truncated JC table: " + path);
  return table;
}

const Table& Table::cached() {
  static const Table table = [] {
    const char* dir = std::getenv("ODF_CACHE_DIR");
    if (dir != nullptr && *dir != '\0') {
      std::filesystem::path cache = std::filesystem::path(dir) / "jc_table_v1.bin";
      if (std::filesystem::exists(cache)) {
        try {
          return Table::load(cache.string());
        } catch (const std::exception&) {
          // stale cache; fall through to regeneration
        }
      }
      Table fresh = Table::generate();
      try {
        std::filesystem::create_directories(dir);
        fresh.save(cache.string());
      } catch (const std::exception&) {
        // cache directory not writable; keep the in-memory table
      }
      return fresh;
    }
    return Table::generate();
  }();
  return table;
}

}  // namespace odf::jc
