#include <cmath>
#include <limits>

#include "shapead/cases.hpp"
#include "shapead/error.hpp"

namespace shapead {

const RateBands kRateBands{{{0.85, 1.15}, {1.85, 2.15}, {2.75, 3.25}}};
const RateBands kPironneauRateBands{{{0.9, std::numeric_limits<double>::infinity()}, {1.9, 2.1}, {2.8, 3.2}}};

namespace {

const std::vector<double>& rates_of(const TaylorResult& t, int order) {
  return order == 0 ? t.rate0 : order == 1 ? t.rate1 : t.rate2;
}

// Row k (k >= 1) fails when one of its rates is NaN or outside its band.
std::vector<int> failing_rows(const TaylorResult& t, const RateBands& bands) {
  std::vector<int> rows;
  const int orders = t.second_order ? 3 : 2;
  for (std::size_t k = 1; k < t.h.size(); ++k) {
    bool bad = false;
    for (int o = 0; o < orders; ++o) {
      const double r = rates_of(t, o)[k - 1];
      bad = bad || !(r >= bands[o].lo && r <= bands[o].hi);
    }
    if (bad) rows.push_back(static_cast<int>(k));
  }
  return rows;
}

}  // namespace

bool taylor_rates_ok(const TaylorResult& t, const RateBands& bands) {
  return t.h.size() > 1 && failing_rows(t, bands).empty();
}

nlohmann::json taylor_report(const TaylorResult& t, const RateBands& bands) {
  nlohmann::json j = nlohmann::json::parse(t.to_json());
  j["rates_ok"] = taylor_rates_ok(t, bands);
  j["failing_rows"] = failing_rows(t, bands);
  return j;
}

std::string to_string(TubeVariant v) { return v == TubeVariant::Frozen ? "frozen" : "decomposed"; }

std::string to_string(PironneauPipeline p) {
  return p == PironneauPipeline::RieszDescent ? "riesz-descent" : "through-deformation";
}

std::string to_string(RieszKind k) {
  switch (k) {
    case RieszKind::L2:
      return "l2";
    case RieszKind::H1:
      return "h1";
    case RieszKind::Elasticity:
      return "elasticity";
  }
  return "?";
}

TubeVariant parse_tube_variant(const std::string& s) {
  if (s == "frozen") return TubeVariant::Frozen;
  if (s == "decomposed") return TubeVariant::Decomposed;
  throw Error("unknown tube variant '" + s + "' (frozen, decomposed)");
}

PironneauPipeline parse_pironneau_pipeline(const std::string& s) {
  if (s == "riesz-descent") return PironneauPipeline::RieszDescent;
  if (s == "through-deformation") return PironneauPipeline::ThroughDeformation;
  throw Error("unknown pipeline '" + s + "' (riesz-descent, through-deformation)");
}

RieszKind parse_riesz_kind(const std::string& s) {
  if (s == "l2") return RieszKind::L2;
  if (s == "h1") return RieszKind::H1;
  if (s == "elasticity") return RieszKind::Elasticity;
  throw Error("unknown inner product '" + s + "' (l2, h1, elasticity)");
}

nlohmann::json mesh_report(const Mesh& mesh) {
  const MeshStats st = mesh_stats(mesh);
  nlohmann::json tags = nlohmann::json::object();
  for (const auto& [tag, n] : st.facets_per_tag) tags[std::to_string(tag)] = n;
  return {{"schema", kReportSchema},
          {"vertices", st.num_vertices},
          {"cells", st.num_cells},
          {"edges", st.num_edges},
          {"marked_facets", st.num_marked_facets},
          {"area", st.area},
          {"min_quality", st.min_quality},
          {"facets_per_tag", tags}};
}

}  // namespace shapead
