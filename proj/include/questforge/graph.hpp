#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <limits>
#include <utility>
#include <vector>

namespace questforge::graph {

/// Strongly connected components of a digraph given as an adjacency list
/// (`adjacency[v]` is a random-access range of successor indices). Iterative Tarjan, so deep
/// chains do not exhaust the stack. Components come out in reverse
/// topological order; nodes inside a component are sorted ascending.
template <class Adjacency>
std::vector<std::vector<std::size_t>> strongly_connected_components(const Adjacency& adjacency) {
  constexpr auto unvisited = std::numeric_limits<std::size_t>::max();
  const std::size_t n = adjacency.size();
  std::vector<std::size_t> index(n, unvisited), lowlink(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  std::size_t counter = 0;

  // (node, position of the next successor to visit)
  std::vector<std::pair<std::size_t, std::size_t>> call;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, pos] = call.back();
      if (pos == 0) {
        index[v] = lowlink[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      const auto& succ = adjacency[v];
      bool descended = false;
      while (pos < std::size(succ)) {
        const std::size_t w = succ[pos];
        ++pos;
        if (index[w] == unvisited) {
          call.emplace_back(w, 0);
          descended = true;
          break;
        }
        if (on_stack[w]) lowlink[v] = std::min(lowlink[v], index[w]);
      }
      if (descended) continue;

      const std::size_t done = v;
      if (lowlink[done] == index[done]) {
        std::vector<std::size_t> component;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component.push_back(w);
        } while (w != done);
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
      }
      call.pop_back();
      if (!call.empty()) {
        const std::size_t parent = call.back().first;
        lowlink[parent] = std::min(lowlink[parent], lowlink[done]);
      }
    }
  }
  return components;
}

/// Components that contain a cycle: more than one node, or one node with a
/// self-loop. Sorted by smallest member.
template <class Adjacency>
std::vector<std::vector<std::size_t>> cyclic_components(const Adjacency& adjacency) {
  std::vector<std::vector<std::size_t>> out;
  for (auto& component : strongly_connected_components(adjacency)) {
    const auto v = component.front();
    const bool self_loop =
        std::find(std::begin(adjacency[v]), std::end(adjacency[v]), v) != std::end(adjacency[v]);
    if (component.size() > 1 || self_loop) out.push_back(std::move(component));
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <class Adjacency>
bool is_acyclic(const Adjacency& adjacency) {
  return cyclic_components(adjacency).empty();
}

}  // namespace questforge::graph
