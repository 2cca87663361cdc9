#include "stas/envs/layout.hpp"

#include <array>
#include <deque>
#include <fstream>
#include <sstream>

#include "stas/core/errors.hpp"

namespace stas::envs {

namespace {

[[noreturn]] void reject(const std::string& why) { throw ConfigError("layout", why); }

}  // namespace

const std::string& default_layout_text() {
  static const std::string text =
      "###########\n"
      "#####T#####\n"
      "#...#.#...#\n"
      "#1.bA.B.2.#\n"
      "#...#.#...#\n"
      "#####a#####\n"
      "###########\n";
  return text;
}

GridLayout GridLayout::parse(std::string_view text) {
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) reject("empty grid");

  GridLayout g;
  g.width_ = static_cast<int>(rows[0].size());
  g.height_ = static_cast<int>(rows.size());
  std::array<int, 128> seen{};
  for (int y = 0; y < g.height_; ++y) {
    const std::string& row = rows[static_cast<std::size_t>(y)];
    if (static_cast<int>(row.size()) != g.width_) reject("rows differ in length");
    for (int x = 0; x < g.width_; ++x) {
      const char c = row[static_cast<std::size_t>(x)];
      const Cell cell{x, y};
      switch (c) {
        case '#': case '.': break;
        case 'a': g.key_a_ = cell; break;
        case 'b': g.key_b_ = cell; break;
        case 'A': g.door_a_ = cell; break;
        case 'B': g.door_b_ = cell; break;
        case '1': g.spawn_a_ = cell; break;
        case '2': g.spawn_b_ = cell; break;
        case 'T': g.treasure_ = cell; break;
        default: reject(std::string("unknown cell character '") + c + "'");
      }
      ++seen[static_cast<unsigned char>(c) & 127];
      g.cells_.push_back(c);
    }
  }
  for (char c : std::string("abAB12T")) {
    if (seen[static_cast<unsigned char>(c)] != 1) {
      reject(std::string("need exactly one '") + c + "'");
    }
  }

  // Ordering: Alice (behind door A) must open door B for Bob, Bob must then
  // open door A, and only with both open can either reach the treasure.
  auto has = [&](const std::vector<bool>& r, Cell c) {
    return r[static_cast<std::size_t>(c.y * g.width_ + c.x)];
  };
  const auto alice_closed = g.reachable(g.spawn_a_, false, false);
  const auto bob_closed = g.reachable(g.spawn_b_, false, false);
  if (!has(alice_closed, g.key_b_)) reject("Alice cannot reach key-B from her room");
  if (has(alice_closed, g.key_a_) || has(alice_closed, g.treasure_) ||
      has(alice_closed, g.spawn_b_)) {
    reject("Alice is not locked in her room");
  }
  if (has(bob_closed, g.key_a_) || has(bob_closed, g.key_b_) || has(bob_closed, g.treasure_) ||
      has(bob_closed, g.spawn_a_)) {
    reject("Bob is not locked in his room");
  }
  const auto alice_b_open = g.reachable(g.spawn_a_, false, true);
  const auto bob_b_open = g.reachable(g.spawn_b_, false, true);
  if (has(alice_b_open, g.key_a_)) reject("Alice can open her own door");
  if (has(bob_b_open, g.key_b_)) reject("Bob can reach key-B");
  if (!has(bob_b_open, g.key_a_)) reject("Bob cannot reach key-A once freed");
  const auto alice_open = g.reachable(g.spawn_a_, true, true);
  const auto bob_open = g.reachable(g.spawn_b_, true, true);
  if (!has(alice_open, g.treasure_) || !has(bob_open, g.treasure_)) {
    reject("treasure unreachable with both doors open");
  }
  return g;
}

GridLayout GridLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("layout", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool GridLayout::passable(Cell c, bool door_a_open, bool door_b_open) const {
  if (!inside(c)) return false;
  switch (at(c)) {
    case '#': return false;
    case 'A': return door_a_open;
    case 'B': return door_b_open;
    default: return true;
  }
}

std::vector<bool> GridLayout::reachable(Cell from, bool door_a_open, bool door_b_open) const {
  std::vector<bool> seen(cells_.size(), false);
  std::deque<Cell> frontier{from};
  seen[static_cast<std::size_t>(from.y * width_ + from.x)] = true;
  constexpr std::array<Cell, 4> steps{Cell{0, -1}, Cell{0, 1}, Cell{-1, 0}, Cell{1, 0}};
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    for (Cell d : steps) {
      const Cell n{c.x + d.x, c.y + d.y};
      if (!passable(n, door_a_open, door_b_open)) continue;
      const auto k = static_cast<std::size_t>(n.y * width_ + n.x);
      if (seen[k]) continue;
      seen[k] = true;
      frontier.push_back(n);
    }
  }
  return seen;
}

std::string GridLayout::text() const {
  std::string out;
  for (int y = 0; y < height_; ++y) {
    out.append(cells_.begin() + y * width_, cells_.begin() + (y + 1) * width_);
    out.push_back('\n');
  }
  return out;
}

}  // namespace stas::envs
