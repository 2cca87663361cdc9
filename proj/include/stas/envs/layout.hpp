#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace stas::envs {

// Alice & Bob grid alphabet:
//   '#' wall    '.' floor
//   'a' key-A   'b' key-B    (touching key X opens door X)
//   'A' door-A  'B' door-B
//   '1' Alice spawn  '2' Bob spawn  'T' treasure
// Alice starts behind door A, Bob behind door B. Key-B sits in Alice's room,
// key-A is only reachable by Bob once door B is open.
struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

class GridLayout {
 public:
  // Parses and validates; throws ConfigError("layout", ...) on malformed
  // grids or on any geometry that breaks the Alice-first ordering.
  static GridLayout parse(std::string_view text);
  static GridLayout load(const std::string& path);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  char at(Cell c) const { return cells_[static_cast<std::size_t>(c.y * width_ + c.x)]; }
  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  Cell spawn_a() const noexcept { return spawn_a_; }
  Cell spawn_b() const noexcept { return spawn_b_; }
  Cell key_a() const noexcept { return key_a_; }
  Cell key_b() const noexcept { return key_b_; }
  Cell door_a() const noexcept { return door_a_; }
  Cell door_b() const noexcept { return door_b_; }
  Cell treasure() const noexcept { return treasure_; }

  // Cells reachable from `from` given which doors are open.
  std::vector<bool> reachable(Cell from, bool door_a_open, bool door_b_open) const;
  bool passable(Cell c, bool door_a_open, bool door_b_open) const;

  std::string text() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<char> cells_;
  Cell spawn_a_, spawn_b_, key_a_, key_b_, door_a_, door_b_, treasure_;
};

// Text of layouts/alice_bob_default.txt.
const std::string& default_layout_text();

}  // namespace stas::envs
