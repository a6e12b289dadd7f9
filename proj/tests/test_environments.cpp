#include <doctest.h>

#include <deque>
#include <map>
#include <random>
#include <sstream>

#include "pose/grid_maze.hpp"
#include "pose/point_maze.hpp"

using namespace pose;

namespace {

Action a(int i) { return Action::discrete(i); }
Action move(double x, double y) {
  Vec v(2);
  v << x, y;
  return Action::continuous(v);
}

// Shortest action sequence between two cells by breadth-first search over the
// static map, optionally treating the door as open.
std::vector<int> bfs(const GridMaze& m, std::pair<int, int> from, std::pair<int, int> to, bool door_open) {
  const int dx[4] = {1, 0, -1, 0};
  const int dy[4] = {0, -1, 0, 1};
  std::map<std::pair<int, int>, std::pair<std::pair<int, int>, int>> parent;
  std::deque<std::pair<int, int>> q{from};
  parent[from] = {from, -1};
  while (!q.empty()) {
    auto cur = q.front();
    q.pop_front();
    if (cur == to) break;
    for (int k = 0; k < 4; ++k) {
      std::pair<int, int> nxt{cur.first + dx[k], cur.second + dy[k]};
      if (nxt.first < 0 || nxt.second < 0 || nxt.first >= static_cast<int>(m.width()) ||
          nxt.second >= static_cast<int>(m.height()))
        continue;
      const Cell c = m.at(static_cast<std::size_t>(nxt.first), static_cast<std::size_t>(nxt.second));
      if (c == Cell::wall || (c == Cell::door && !door_open)) continue;
      // Goals end the episode, so only the target goal may be entered.
      if ((c == Cell::treasure || c == Cell::apple) && nxt != to) continue;
      if (parent.count(nxt)) continue;
      parent[nxt] = {cur, k};
      q.push_back(nxt);
    }
  }
  std::vector<int> actions;
  for (auto cur = to; cur != from; cur = parent.at(cur).first) actions.insert(actions.begin(), parent.at(cur).second);
  return actions;
}

std::pair<int, int> find(const GridMaze& m, Cell c) {
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x)
      if (m.at(x, y) == c) return {static_cast<int>(x), static_cast<int>(y)};
  return {-1, -1};
}

}  // namespace

TEST_CASE("load a tiny map") {
  GridMaze m = load_maze("###\n#S#\n###", GridRewards{}, 10);
  CHECK(m.width() == 3);
  CHECK(m.height() == 3);
  int free = 0;
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) free += m.at(x, y) != Cell::wall;
  CHECK(free == 1);
  CHECK(m.at(1, 1) == Cell::start);
}

TEST_CASE("malformed maps report row and column") {
  auto err = [](const char* text) -> ParseError {
    try {
      load_maze(text, GridRewards{}, 10);
    } catch (const ParseError& e) {
      return e;
    }
    FAIL("expected a parse error");
    return ParseError("", 0, 0);
  };
  const ParseError two = err("#S#\n#S#\n");
  CHECK(two.line() == 2);
  CHECK(two.column() == 2);
  const ParseError glyph = err("###\n#SX\n###\n");
  CHECK(glyph.line() == 2);
  CHECK(glyph.column() == 3);
  const ParseError ragged = err("###\n#S\n###\n");
  CHECK(ragged.line() == 2);
  CHECK_THROWS_AS(load_maze("###\n#.#\n", GridRewards{}, 10), ParseError);
  CHECK_THROWS_AS(load_maze("#S#\n\n###\n", GridRewards{}, 10), ParseError);
}

TEST_CASE("render then parse is the identity") {
  for (const auto& name : bundled_map_names()) {
    const std::string text = bundled_map(name);
    GridMaze m = load_maze(text, bundled_rewards(name), 100);
    CHECK(m.render() == text);
    CHECK(load_maze(m.render(), GridRewards{}, 100).render() == text);
  }
  CHECK_THROWS_AS(bundled_map("nope"), InvalidArgument);
}

TEST_CASE("bundled deceptive maps place the apple up-left of the treasure") {
  for (const char* name : {"deceptive15", "deceptive25"}) {
    GridMaze m = load_maze(bundled_map(name), bundled_rewards(name), 300);
    auto apple = find(m, Cell::apple);
    auto treasure = find(m, Cell::treasure);
    auto start = find(m, Cell::start);
    CHECK(apple.first < treasure.first);
    CHECK(apple.second > start.second);
    CHECK(treasure.second > static_cast<int>(m.height()) / 2);
    CHECK(start.first < static_cast<int>(m.width()) / 4);
    CHECK(start.second < static_cast<int>(m.height()) / 4);
  }
}

TEST_CASE("reset observes the zero vector at the start") {
  for (const auto& name : bundled_map_names()) {
    GridMaze m = load_maze(bundled_map(name), bundled_rewards(name), 50);
    const Vec obs = m.reset(3);
    CHECK(obs.isZero());
    CHECK(m.steps_taken() == 0);
    CHECK_FALSE(m.has_key());
  }
  PointMaze p(point_maze_preset("point-u"));
  CHECK(p.reset(1).isZero());
  CHECK(p.position() == p.layout().start);
}

TEST_CASE("grid moves, walls and goals") {
  GridMaze m = load_maze("#####\n#S.A#\n#.#T#\n#####\n", GridRewards{}, 20);
  m.reset(0);
  const Vec start = m.position();
  StepResult r = m.step(a(3));  // north into a wall
  CHECK(m.position() == start);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done);
  m.step(a(0));
  r = m.step(a(0));
  CHECK(r.reward == 2.0);
  CHECK(r.done);
  CHECK(r.goal == grid_goal::apple);

  m.reset(0);
  m.step(a(0));
  m.step(a(0));
  CHECK_THROWS_AS(m.step(a(4)), InvalidArgument);

  GridMaze u = load_maze("#####\n#S..#\n#.#T#\n#####\n", GridRewards{}, 20);
  u.reset(0);
  u.step(a(0));
  u.step(a(0));
  r = u.step(a(1));
  CHECK(r.reward == 10.0);
  CHECK(r.done);
  CHECK(r.goal == grid_goal::treasure);
  CHECK_FALSE(r.truncated);
}

TEST_CASE("step limit truncates with zero reward") {
  GridMaze m = load_maze("###\n#S#\n###\n", GridRewards{}, 3);
  m.reset(0);
  CHECK_FALSE(m.step(a(0)).done);
  CHECK_FALSE(m.step(a(1)).done);
  const StepResult r = m.step(a(2));
  CHECK(r.done);
  CHECK(r.truncated);
  CHECK(r.reward == 0.0);
  CHECK_THROWS_AS(m.step(a(0)), InvalidArgument);
}

TEST_CASE("grid dynamics are deterministic") {
  GridMaze m1 = load_maze(bundled_map("kdt21"), bundled_rewards("kdt21"), 300);
  GridMaze m2 = m1;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> U(0, 3);
  m1.reset(1);
  m2.reset(2);
  for (int i = 0; i < 300; ++i) {
    const int act = U(rng);
    const StepResult r1 = m1.step(a(act));
    const StepResult r2 = m2.step(a(act));
    CHECK(r1.observation == r2.observation);
    CHECK(r1.reward == r2.reward);
    CHECK(r1.done == r2.done);
    if (r1.done) break;
  }
}

TEST_CASE("random walks never enter walls or exceed the step limit") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> U(0, 3);
  for (const auto& name : bundled_map_names()) {
    GridMaze m = load_maze(bundled_map(name), bundled_rewards(name), 120);
    for (int ep = 0; ep < 20; ++ep) {
      m.reset(static_cast<std::uint64_t>(ep));
      std::size_t steps = 0;
      for (;;) {
        const StepResult r = m.step(a(U(rng)));
        ++steps;
        const auto x = static_cast<std::size_t>(r.position(0));
        const auto y = static_cast<std::size_t>(r.position(1));
        CHECK(m.at(x, y) != Cell::wall);
        if (m.at(x, y) == Cell::door) CHECK(m.has_key());
        if (r.done) break;
      }
      CHECK(steps <= 120);
    }
  }
}

TEST_CASE("scripted key-door-treasure path collects rewards in order") {
  for (const char* name : {"kdt21", "kdt25"}) {
    GridMaze m = load_maze(bundled_map(name), bundled_rewards(name), 1000);
    const auto start = find(m, Cell::start), key = find(m, Cell::key), door = find(m, Cell::door),
               treasure = find(m, Cell::treasure);
    std::vector<int> plan = bfs(m, start, key, false);
    const auto to_door = bfs(m, key, door, true);
    const auto to_treasure = bfs(m, door, treasure, true);
    plan.insert(plan.end(), to_door.begin(), to_door.end());
    plan.insert(plan.end(), to_treasure.begin(), to_treasure.end());

    m.reset(0);
    std::vector<double> rewards;
    StepResult r;
    for (int act : plan) {
      r = m.step(a(act));
      if (r.reward != 0.0) rewards.push_back(r.reward);
    }
    CHECK(r.done);
    CHECK(r.goal == grid_goal::treasure);
    REQUIRE(rewards.size() == 3);
    CHECK(rewards[0] == 2.0);
    CHECK(rewards[1] == 4.0);
    CHECK(rewards[2] == 4.0);

    // The door is locked without the key.
    m.reset(0);
    for (int act : bfs(m, start, {door.first, door.second - 1}, false)) m.step(a(act));
    const StepResult blocked = m.step(a(3));
    CHECK(blocked.reward == 0.0);
    CHECK(blocked.position(1) == door.second - 1);
  }
}

TEST_CASE("observation is relative to the start, scaled by the map extent") {
  GridMaze m = load_maze(bundled_map("kdt21"), bundled_rewards("kdt21"), 100);
  m.reset(0);
  const StepResult r = m.step(a(0));
  CHECK(r.observation.size() == 3);
  CHECK(r.observation(0) == doctest::Approx(1.0 / 20.0));
  CHECK(r.observation(1) == 0.0);
  CHECK(r.observation(2) == 0.0);
  GridMaze d = load_maze(bundled_map("deceptive15"), bundled_rewards("deceptive15"), 100);
  CHECK(d.observation_dim() == 2);
}

TEST_CASE("point maze clips moves and stops at walls") {
  PointMaze p(point_maze_preset("point-u"));
  p.reset(0);
  StepResult r = p.step(move(3.0, 0.0));
  CHECK(r.position(0) == doctest::Approx(5.5));
  CHECK(r.position(1) == doctest::Approx(1.0));
  p.step(move(0.5, 0.0));
  p.step(move(0.5, 0.0));
  const Vec before = p.position();
  r = p.step(move(0.5, 0.0));  // crosses the wall at x = 7
  CHECK(p.position() == before);
  CHECK_FALSE(r.done);
  CHECK_THROWS_AS(p.step(move(std::nan(""), 0.0)), InvalidArgument);
  Vec three(3);
  three << 0, 0, 0;
  CHECK_THROWS_AS(p.step(Action::continuous(three)), InvalidArgument);
}

TEST_CASE("point maze goals pay their reward and end the episode") {
  PointMaze p(point_maze_preset("point-u"));
  p.reset(0);
  StepResult r;
  for (int i = 0; i < 20 && !r.done; ++i) r = p.step(move(-0.5, 0.0));
  CHECK(r.done);
  CHECK(r.reward == 200.0);
  CHECK(r.goal != p.optimal_goal());

  // Far goal: up over the wall, across, down.
  p.reset(0);
  r = StepResult{};
  for (int i = 0; i < 7; ++i) r = p.step(move(0.0, 0.5));
  for (int i = 0; i < 7 && !r.done; ++i) r = p.step(move(0.5, 0.0));
  for (int i = 0; i < 10 && !r.done; ++i) r = p.step(move(0.0, -0.5));
  CHECK(r.done);
  CHECK(r.reward == 500.0);
  CHECK(r.goal == p.optimal_goal());
}

TEST_CASE("point maze random walks never cross walls") {
  PointMazeLayout l = point_maze_preset("point-u");
  l.max_steps = 200;
  PointMaze p(l);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 0.5);
  for (int ep = 0; ep < 20; ++ep) {
    p.reset(static_cast<std::uint64_t>(ep));
    std::size_t steps = 0;
    for (;;) {
      const Vec prev = p.position();
      const StepResult r = p.step(move(N(rng), N(rng)));
      ++steps;
      CHECK((r.position - prev).norm() <= l.step_size + 1e-12);
      CHECK(r.position(0) > 0.0);
      CHECK(r.position(0) < l.width);
      CHECK(r.position(1) > 0.0);
      CHECK(r.position(1) < l.height);
      // Never on the far side of the wall below its top without a detour.
      if (r.position(1) < 3.5) CHECK((prev(0) - 7.0) * (r.position(0) - 7.0) >= 0.0);
      if (r.done) break;
    }
    CHECK(steps <= l.max_steps);
  }
}

TEST_CASE("point maze noise is reproducible from the reset seed") {
  PointMazeLayout l = point_maze_preset("point-open");
  l.action_noise = 0.1;
  PointMaze p(l), q(l);
  p.reset(42);
  q.reset(42);
  for (int i = 0; i < 10; ++i) CHECK(p.step(move(0.1, 0.1)).position == q.step(move(0.1, 0.1)).position);
}

TEST_CASE("segment intersection") {
  const Eigen::Vector2d o(0, 0), x(2, 0), m(1, -1), n(1, 1), far(5, 5);
  CHECK(segments_intersect(o, x, m, n));
  CHECK_FALSE(segments_intersect(o, x, far, Eigen::Vector2d(6, 6)));
  CHECK(segments_intersect(o, x, x, Eigen::Vector2d(3, 3)));
}

TEST_CASE("visitation counts and exploration bonus") {
  VisitationCounter c(VisitGrid{3, 2, 1.0, -0.5, -0.5});
  Vec p(2);
  p << 1, 1;
  const std::size_t cell = c.record(p);
  CHECK(exploration_bonus(c, cell, 0.1) == doctest::Approx(0.1));
  c.record(p);
  c.record(p);
  c.record(p);
  CHECK(exploration_bonus(c, cell, 0.1) == doctest::Approx(0.05));
  CHECK(exploration_bonus(c, cell, 0.0) == 0.0);
  p << 0, 0;
  CHECK_THROWS_AS(exploration_bonus(c, c.cell_of(p), 0.1), InvalidArgument);
  c.record(p);
  p << 99, -4;  // clamped into the lattice
  c.record(p);
  CHECK(c.total() == 6);

  std::stringstream ss;
  c.write_csv(ss);
  CHECK(ss.str() == "3,2\n0,4,0\n1,0,1\n");
  const VisitationCounter back = VisitationCounter::read_csv(ss);
  CHECK(back.counts() == c.counts());
  CHECK(back.total() == c.total());
  std::stringstream bad("3,2\n1,2\n");
  CHECK_THROWS_AS(VisitationCounter::read_csv(bad), ParseError);
}
