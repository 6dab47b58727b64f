#include "smf/apps/segmentation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace smf::apps {

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct Piece {
  std::vector<Index> pixels;  // sorted
  Index column;
};

// 8-connected components of a boolean support image.
std::vector<std::vector<Index>> components_of(const std::vector<char>& on, Index height, Index width) {
  std::vector<std::vector<Index>> out;
  std::vector<char> seen(on.size(), 0);
  std::vector<Index> stack;
  for (Index start = 0; start < height * width; ++start) {
    if (!on[start] || seen[start]) continue;
    std::vector<Index> comp;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const Index p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      const Index r = p / width;
      const Index c = p % width;
      for (Index dr = -1; dr <= 1; ++dr) {
        for (Index dc = -1; dc <= 1; ++dc) {
          const Index rr = r + dr;
          const Index cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= height || cc >= width) continue;
          const Index q = rr * width + cc;
          if (on[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

Index overlap_count(const std::vector<Index>& a, const std::vector<Index>& b) {
  Index n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

}  // namespace

Mask SegmentationResult::component_mask(std::size_t k) const {
  Mask m = Mask::Constant(labels.rows(), labels.cols(), false);
  const Index width = labels.cols();
  for (Index p : components.at(k).pixels) m(p / width, p % width) = true;
  return m;
}

std::vector<Mask> SegmentationResult::masks() const {
  std::vector<Mask> out;
  out.reserve(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) out.push_back(component_mask(k));
  return out;
}

SegmentationResult segment(const Matrix& V, Index height, Index width, double support_tol,
                           double overlap_thresh) {
  if (height <= 0 || width <= 0 || V.rows() != height * width) {
    throw std::invalid_argument("segment: V rows must equal height * width");
  }
  const Index npix = height * width;
  Matrix normalized = Matrix::Zero(npix, V.cols());
  std::vector<Piece> pieces;
  for (Index j = 0; j < V.cols(); ++j) {
    const double peak = V.col(j).cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) continue;
    normalized.col(j) = V.col(j).cwiseAbs() / peak;
    std::vector<char> on(static_cast<std::size_t>(npix), 0);
    for (Index p = 0; p < npix; ++p) on[p] = normalized(p, j) > support_tol ? 1 : 0;
    for (auto& comp : components_of(on, height, width)) pieces.push_back({std::move(comp), j});
  }

  DisjointSets sets(pieces.size());
  for (std::size_t a = 0; a < pieces.size(); ++a) {
    for (std::size_t b = a + 1; b < pieces.size(); ++b) {
      if (pieces[a].column == pieces[b].column) continue;
      const Index shared = overlap_count(pieces[a].pixels, pieces[b].pixels);
      if (shared == 0) continue;
      const auto smaller = std::min(pieces[a].pixels.size(), pieces[b].pixels.size());
      if (static_cast<double>(shared) > overlap_thresh * static_cast<double>(smaller)) sets.unite(a, b);
    }
  }

  std::vector<std::vector<std::size_t>> groups(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) groups[sets.find(i)].push_back(i);

  SegmentationResult result;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    Component c;
    for (std::size_t i : g) {
      c.pixels.insert(c.pixels.end(), pieces[i].pixels.begin(), pieces[i].pixels.end());
      c.columns.push_back(pieces[i].column);
    }
    std::sort(c.pixels.begin(), c.pixels.end());
    c.pixels.erase(std::unique(c.pixels.begin(), c.pixels.end()), c.pixels.end());
    std::sort(c.columns.begin(), c.columns.end());
    c.columns.erase(std::unique(c.columns.begin(), c.columns.end()), c.columns.end());
    result.components.push_back(std::move(c));
  }
  // Column order must not matter: order by pixel content only.
  std::sort(result.components.begin(), result.components.end(),
            [](const Component& a, const Component& b) {
              const auto na = a.pixels.size();
              const auto nb = b.pixels.size();
              return std::tie(a.pixels.front(), na, a.pixels) < std::tie(b.pixels.front(), nb, b.pixels);
            });

  result.labels = LabelImage::Zero(height, width);
  std::vector<double> strength(static_cast<std::size_t>(npix), -1.0);
  for (std::size_t k = 0; k < result.components.size(); ++k) {
    const Component& c = result.components[k];
    for (Index p : c.pixels) {
      double s = 0.0;
      for (Index j : c.columns) s = std::max(s, normalized(p, j));
      if (s > strength[p]) {
        strength[p] = s;
        result.labels(p / width, p % width) = static_cast<int>(k + 1);
      }
    }
  }
  return result;
}

}  // namespace smf::apps
