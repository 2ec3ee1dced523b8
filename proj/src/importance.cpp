#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "citeworth/error.hpp"
#include "citeworth/eval.hpp"
#include "citeworth/linear.hpp"

namespace citeworth::linear {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

const char* sign_text(int s) { return s > 0 ? "+" : s < 0 ? "-" : "0"; }

}  // namespace

ImportanceReport importance_report(const RfModel& rf, const EnlrModel& enlr,
                                   const std::vector<std::string>& feature_names,
                                   const std::vector<std::string>& categories) {
  const std::size_t m = feature_names.size();
  if (rf.n_features != m || static_cast<std::size_t>(enlr.beta.size()) != m ||
      categories.size() != m || rf.importances.size() != m) {
    throw Error(ErrorCode::FeatureSpaceMismatch,
                "forest (" + std::to_string(rf.n_features) + "), regression (" +
                    std::to_string(enlr.beta.size()) + ") and names (" + std::to_string(m) +
                    ") disagree on the feature dimension");
  }
  ImportanceReport report;
  std::map<std::string, std::size_t> cat_index;
  for (std::size_t j = 0; j < m; ++j) {
    const double b = enlr.beta[static_cast<Eigen::Index>(j)];
    const int sign = b > 0 ? 1 : b < 0 ? -1 : 0;
    report.features.push_back({feature_names[j], categories[j], rf.importances[j], sign});
    auto [it, inserted] = cat_index.emplace(categories[j], report.categories.size());
    if (inserted) report.categories.push_back({categories[j], 0.0, 0, 0});
    auto& c = report.categories[it->second];
    c.importance += rf.importances[j];
    ++c.members;
    c.sign = c.members == 1 ? sign : 0;
  }
  return report;
}

std::vector<FeatureImportance> top_features(const ImportanceReport& report,
                                            const std::string& category, std::size_t top) {
  std::vector<FeatureImportance> out;
  for (const auto& f : report.features) {
    if (f.category == category) out.push_back(f);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.importance > b.importance;
  });
  if (out.size() > top) out.resize(top);
  return out;
}

std::string importance_csv(const ImportanceReport& report) {
  std::ostringstream out;
  out << "feature,category,importance,sign\n";
  for (const auto& f : report.features) {
    out << eval::csv_field(f.feature) << ',' << eval::csv_field(f.category) << ','
        << fmt(f.importance) << ',' << sign_text(f.sign) << '\n';
  }
  return out.str();
}

std::string category_csv(const ImportanceReport& report) {
  std::ostringstream out;
  out << "category,importance,members,sign\n";
  for (const auto& c : report.categories) {
    out << eval::csv_field(c.category) << ',' << fmt(c.importance) << ',' << c.members << ','
        << (c.members == 1 ? sign_text(c.sign) : "N/A") << '\n';
  }
  return out.str();
}

nlohmann::json importance_json(const ImportanceReport& report) {
  nlohmann::json j;
  j["features"] = nlohmann::json::array();
  for (const auto& f : report.features) {
    j["features"].push_back(
        {{"feature", f.feature}, {"category", f.category}, {"importance", f.importance}, {"sign", f.sign}});
  }
  j["categories"] = nlohmann::json::array();
  for (const auto& c : report.categories) {
    nlohmann::json row{{"category", c.category}, {"importance", c.importance}, {"members", c.members}};
    row["sign"] = c.members == 1 ? nlohmann::json(c.sign) : nlohmann::json(nullptr);
    j["categories"].push_back(std::move(row));
  }
  return j;
}

}  // namespace citeworth::linear
