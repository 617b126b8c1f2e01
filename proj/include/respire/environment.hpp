#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "respire/common.hpp"

namespace respire {

enum class Cell : std::uint8_t { Free, Occupied, Unknown };

struct CellIndex {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct RobotPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

enum class SensorKind { Camera, Lidar };

struct SensorConfig {
  double max_range = 6.0;
  double half_angle = kPi / 4.0;
  SensorKind kind = SensorKind::Camera;

  void validate() const {
    if (!(max_range > 0.0)) throw DomainError("sensor max_range must be > 0");
    if (!(half_angle > 0.0 && half_angle <= kPi)) {
      throw DomainError("sensor half_angle must be in (0, pi]");
    }
  }
};

/// Axis-aligned 2-D occupancy grid. Cell (0,0) has its lower-left corner at
/// `origin`; x grows with column index, y with row index.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;

  OccupancyGrid(int width, int height, double resolution, Vec2 origin, Cell fill = Cell::Unknown)
      : width_(width), height_(height), resolution_(resolution), origin_(origin) {
    if (width < 1 || height < 1) throw DomainError("grid width and height must be >= 1");
    if (!(resolution > 0.0)) throw DomainError("grid resolution must be > 0");
    cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Vec2& origin() const { return origin_; }
  Vec2 extent() const { return {width_ * resolution_, height_ * resolution_}; }

  bool in_bounds(const CellIndex& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }

  bool contains(const Vec2& p) const {
    const Vec2 rel = p - origin_;
    return rel.x() >= 0.0 && rel.y() >= 0.0 && rel.x() < width_ * resolution_ &&
           rel.y() < height_ * resolution_;
  }

  /// Cell containing `p`; the point need not be in bounds.
  CellIndex cell_of(const Vec2& p) const {
    const Vec2 rel = (p - origin_) / resolution_;
    return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y()))};
  }

  Vec2 cell_center(const CellIndex& c) const {
    return origin_ + Vec2((c.x + 0.5) * resolution_, (c.y + 0.5) * resolution_);
  }

  Cell at(const CellIndex& c) const { return cells_[index(c)]; }
  Cell at(int x, int y) const { return at(CellIndex{x, y}); }
  void set(const CellIndex& c, Cell value) { cells_[index(c)] = value; }

  /// State of the cell containing `p`.
  Cell query(const Vec2& p) const {
    if (!contains(p)) throw DomainError("query point outside map bounds");
    return at(cell_of(p));
  }

  bool same_geometry(const OccupancyGrid& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           resolution_ == other.resolution_ && origin_ == other.origin_;
  }

  std::size_t count(Cell state) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), state));
  }

  const std::vector<Cell>& cells() const { return cells_; }

  friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
    return a.same_geometry(b) && a.cells_ == b.cells_;
  }

 private:
  std::size_t index(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.x);
  }

  int width_ = 1;
  int height_ = 1;
  double resolution_ = 1.0;
  Vec2 origin_ = Vec2::Zero();
  std::vector<Cell> cells_ = {Cell::Unknown};
};

/// Walks the cells crossed by the segment from -> to (supercover DDA) and calls
/// `visit(cell, t_enter, corner)` where t_enter in [0,1] is the segment
/// parameter at which the cell is entered. Cells touched only at a corner are
/// reported with corner = true. Stops when `visit` returns true, when the end
/// cell is reached, or when the walk leaves the grid. `from` must be in bounds.
template <typename Visit>
void traverse_cells(const OccupancyGrid& map, const Vec2& from, const Vec2& to, Visit&& visit) {
  const double res = map.resolution();
  const Vec2 p0 = (from - map.origin()) / res;
  const Vec2 p1 = (to - map.origin()) / res;
  CellIndex cell{static_cast<int>(std::floor(p0.x())), static_cast<int>(std::floor(p0.y()))};
  const CellIndex end{static_cast<int>(std::floor(p1.x())), static_cast<int>(std::floor(p1.y()))};
  const Vec2 d = p1 - p0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const int sx = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
  const int sy = d.y() > 0 ? 1 : (d.y() < 0 ? -1 : 0);
  const double delta_x = sx != 0 ? 1.0 / std::abs(d.x()) : kInf;
  const double delta_y = sy != 0 ? 1.0 / std::abs(d.y()) : kInf;
  double next_x = sx > 0   ? (cell.x + 1 - p0.x()) * delta_x
                  : sx < 0 ? (p0.x() - cell.x) * delta_x
                           : kInf;
  double next_y = sy > 0   ? (cell.y + 1 - p0.y()) * delta_y
                  : sy < 0 ? (p0.y() - cell.y) * delta_y
                           : kInf;

  double t = 0.0;
  const int max_steps = 2 * (map.width() + map.height()) + 4;
  for (int step = 0; step < max_steps; ++step) {
    if (!map.in_bounds(cell)) return;
    if (visit(cell, t, false)) return;
    if (cell == end || t > 1.0) return;
    constexpr double kTie = 1e-12;
    if (std::abs(next_x - next_y) <= kTie) {
      t = next_x;
      if (t > 1.0) return;
      const CellIndex side_a{cell.x + sx, cell.y};
      const CellIndex side_b{cell.x, cell.y + sy};
      if (map.in_bounds(side_a) && visit(side_a, t, true)) return;
      if (map.in_bounds(side_b) && visit(side_b, t, true)) return;
      cell.x += sx;
      cell.y += sy;
      next_x += delta_x;
      next_y += delta_y;
    } else if (next_x < next_y) {
      t = next_x;
      cell.x += sx;
      next_x += delta_x;
    } else {
      t = next_y;
      cell.y += sy;
      next_y += delta_y;
    }
    if (t > 1.0) return;
  }
}

struct RayResult {
  bool blocked = false;
  Vec2 hit_point = Vec2::Zero();
  CellIndex hit_cell{};
};

/// Line-of-sight test. Blocked iff an Occupied cell lies strictly between the
/// endpoint cells along the supercover traversal. Unknown cells do not block.
inline RayResult raycast(const OccupancyGrid& map, const Vec2& from, const Vec2& to) {
  if (!map.contains(from) || !map.contains(to)) {
    throw DomainError("raycast endpoints must lie inside the map");
  }
  const CellIndex start = map.cell_of(from);
  const CellIndex end = map.cell_of(to);
  RayResult result;
  traverse_cells(map, from, to, [&](const CellIndex& c, double t, bool) {
    if (c == start || c == end) return false;
    if (map.at(c) == Cell::Occupied) {
      result.blocked = true;
      result.hit_cell = c;
      result.hit_point = from + t * (to - from);
      return true;
    }
    return false;
  });
  return result;
}

/// True iff `point` is within range, within the sensing cone around the
/// robot heading, and has a clear line of sight.
inline bool is_inside_fov(const RobotPose& robot, const Vec2& point, const SensorConfig& sensor,
                          const OccupancyGrid& map) {
  const Vec2 d = point - robot.position();
  const double range = d.norm();
  if (range > sensor.max_range) return false;
  if (range > 0.0) {
    const double bearing = angle_diff(std::atan2(d.y(), d.x()), robot.theta);
    if (std::abs(bearing) > sensor.half_angle + 1e-12) return false;
  }
  return !raycast(map, robot.position(), point).blocked;
}

/// is_inside_fov for points that may be off the map; those are never visible.
inline bool point_visible(const RobotPose& robot, const Vec2& point, const SensorConfig& sensor,
                          const OccupancyGrid& map) {
  if (!map.contains(point) || !map.contains(robot.position())) return false;
  return is_inside_fov(robot, point, sensor, map);
}

/// Simulated lidar sweep: marks cells along a fan of rays as Free up to the
/// first truth-Occupied cell, which is marked Occupied. Other cells keep their
/// prior state.
inline OccupancyGrid update_map(const OccupancyGrid& known, const RobotPose& robot,
                                const SensorConfig& lidar, const OccupancyGrid& truth) {
  if (!known.same_geometry(truth)) throw DomainError("known and truth maps differ in geometry");
  if (!known.contains(robot.position())) throw DomainError("robot pose outside map");
  OccupancyGrid out = known;
  const double res = known.resolution();
  const int rays = std::max(
      2, static_cast<int>(std::ceil(2.0 * lidar.half_angle * lidar.max_range / (0.5 * res))) + 1);
  const Vec2 from = robot.position();
  for (int i = 0; i < rays; ++i) {
    const double a =
        robot.theta - lidar.half_angle + 2.0 * lidar.half_angle * i / static_cast<double>(rays - 1);
    const Vec2 to = from + lidar.max_range * Vec2(std::cos(a), std::sin(a));
    traverse_cells(known, from, to, [&](const CellIndex& c, double t, bool corner) {
      if (corner) return false;
      if (t >= 1.0) return true;
      if (truth.at(c) == Cell::Occupied) {
        out.set(c, Cell::Occupied);
        return true;
      }
      out.set(c, Cell::Free);
      return false;
    });
  }
  return out;
}

/// Parses the map text format: a header `W H RES OX OY` followed by H rows of W
/// characters from {'.', '#', '?'}; the first row is the minimum-y row.
inline OccupancyGrid load_map(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::string current;
    for (char ch : text) {
      if (ch == '\n') {
        lines.push_back(current);
        current.clear();
      } else if (ch != '\r') {
        current.push_back(ch);
      }
    }
    if (!current.empty()) lines.push_back(current);
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) {
    lines.pop_back();
  }
  if (lines.empty()) throw ParseError(1, "missing header");

  std::istringstream header(lines[0]);
  int w = 0;
  int h = 0;
  double res = 0.0;
  double ox = 0.0;
  double oy = 0.0;
  std::string extra;
  if (!(header >> w >> h >> res >> ox >> oy) || (header >> extra)) {
    throw ParseError(1, "header must be 'W H RES OX OY'");
  }
  if (w < 1 || h < 1 || !(res > 0.0)) throw ParseError(1, "invalid grid dimensions");
  if (static_cast<int>(lines.size()) - 1 != h) {
    throw ParseError(static_cast<int>(lines.size()) + 1,
                     "expected " + std::to_string(h) + " rows, found " +
                         std::to_string(lines.size() - 1));
  }
  OccupancyGrid grid(w, h, res, Vec2(ox, oy));
  for (int row = 0; row < h; ++row) {
    const std::string& line = lines[static_cast<std::size_t>(row) + 1];
    const int line_no = row + 2;
    if (static_cast<int>(line.size()) != w) {
      throw ParseError(line_no, "row length " + std::to_string(line.size()) + " != width " +
                                    std::to_string(w));
    }
    for (int col = 0; col < w; ++col) {
      Cell c = Cell::Unknown;
      switch (line[static_cast<std::size_t>(col)]) {
        case '.': c = Cell::Free; break;
        case '#': c = Cell::Occupied; break;
        case '?': c = Cell::Unknown; break;
        default:
          throw ParseError(line_no, std::string("invalid cell character '") +
                                        line[static_cast<std::size_t>(col)] + "'");
      }
      grid.set({col, row}, c);
    }
  }
  return grid;
}

inline std::string to_text(const OccupancyGrid& map) {
  std::ostringstream out;
  out << map.width() << ' ' << map.height() << ' ' << map.resolution() << ' '
      << map.origin().x() << ' ' << map.origin().y() << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const Cell c = map.at(x, y);
      out << (c == Cell::Free ? '.' : c == Cell::Occupied ? '#' : '?');
    }
    out << '\n';
  }
  return out.str();
}

/// Marks every cell within `radius` of an Occupied cell. Used for
/// conservative collision checks; Unknown cells are treated as traversable.
class InflatedObstacles {
 public:
  InflatedObstacles(const OccupancyGrid& map, double radius) : map_(&map) {
    blocked_.assign(map.cells().size(), 0);
    const double res = map.resolution();
    const int reach = static_cast<int>(std::ceil(radius / res));
    const double r2 = (radius + 0.5 * res) * (radius + 0.5 * res);
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        if (map.at(x, y) != Cell::Occupied) continue;
        for (int dy = -reach; dy <= reach; ++dy) {
          for (int dx = -reach; dx <= reach; ++dx) {
            const CellIndex c{x + dx, y + dy};
            if (!map.in_bounds(c)) continue;
            if ((dx * dx + dy * dy) * res * res > r2) continue;
            blocked_[flat(c)] = 1;
          }
        }
      }
    }
  }

  bool blocked(const CellIndex& c) const { return !map_->in_bounds(c) || blocked_[flat(c)] != 0; }
  bool blocked(const Vec2& p) const { return blocked(map_->cell_of(p)); }
  const OccupancyGrid& map() const { return *map_; }

 private:
  std::size_t flat(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(map_->width()) +
           static_cast<std::size_t>(c.x);
  }

  const OccupancyGrid* map_;
  std::vector<std::uint8_t> blocked_;
};

}  // namespace respire
