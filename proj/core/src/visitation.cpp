#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pose/env.hpp"
#include "pose/text_io.hpp"

namespace pose {

VisitationCounter::VisitationCounter(VisitGrid grid) : grid_(grid), counts_(grid.width * grid.height, 0) {
  if (grid.width == 0 || grid.height == 0) throw InvalidArgument("visit grid must be nonempty");
  if (!(grid.cell_size > 0.0)) throw InvalidArgument("visit grid cell size must be positive");
}

std::size_t VisitationCounter::cell_of(const Vec& position) const {
  if (position.size() < 2) throw InvalidArgument("visitation counter needs 2-D positions");
  auto axis = [&](double v, double origin, std::size_t n) {
    const double c = std::floor((v - origin) / grid_.cell_size);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(n - 1)));
  };
  const std::size_t col = axis(position(0), grid_.origin_x, grid_.width);
  const std::size_t row = axis(position(1), grid_.origin_y, grid_.height);
  return row * grid_.width + col;
}

std::size_t VisitationCounter::record(const Vec& position) {
  const std::size_t cell = cell_of(position);
  ++counts_[cell];
  ++total_;
  return cell;
}

void VisitationCounter::write_csv(std::ostream& out) const {
  out << grid_.width << ',' << grid_.height << '\n';
  for (std::size_t r = grid_.height; r-- > 0;) {
    for (std::size_t c = 0; c < grid_.width; ++c) {
      if (c) out << ',';
      out << counts_[r * grid_.width + c];
    }
    out << '\n';
  }
}

VisitationCounter VisitationCounter::read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("heatmap: missing header", 1, 1);
  auto cells = [&](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string item;
    while (std::getline(ss, item, ',')) out.emplace_back(text::trim(item));
    return out;
  };
  auto head = cells(line);
  VisitGrid g;
  if (head.size() != 2 || !text::parse_int(head[0], g.width) || !text::parse_int(head[1], g.height)) {
    throw ParseError("heatmap: header must be '<width>,<height>'", 1, 1);
  }
  VisitationCounter counter(g);
  for (std::size_t r = g.height; r-- > 0;) {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError("heatmap: missing row", line_no, 1);
    auto row = cells(line);
    if (row.size() != g.width) throw ParseError("heatmap: row has wrong width", line_no, 1);
    for (std::size_t c = 0; c < g.width; ++c) {
      std::uint64_t v = 0;
      if (!text::parse_int(row[c], v)) throw ParseError("heatmap: bad count", line_no, c + 1);
      counter.counts_[r * g.width + c] = v;
      counter.total_ += v;
    }
  }
  return counter;
}

double exploration_bonus(const VisitationCounter& counter, std::size_t cell, double lambda) {
  const auto n = counter.count(cell);
  if (n == 0) throw InvalidArgument("exploration_bonus: cell has not been visited");
  if (lambda < 0.0) throw InvalidArgument("exploration_bonus: lambda must be nonnegative");
  return lambda / std::sqrt(static_cast<double>(n));
}

}  // namespace pose
