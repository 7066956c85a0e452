#include "ovpath/patch_features.hpp"

#include "ovpath/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ovpath {

int Patch::count(CellLabel l) const {
  return static_cast<int>(std::count_if(members.begin(), members.end(), [&](const PatchCell& c) { return c.label == l; }));
}

bool check_eligibility(const Patch& patch, int min_per_type) {
  return patch.count(CellLabel::Tumor) >= min_per_type && patch.count(CellLabel::Stroma) >= min_per_type;
}

std::vector<Patch> tile_patches(int roi_width, int roi_height, const std::vector<PatchCell>& cells,
                                const std::string& roi_id, int patch_size, int min_per_type) {
  if (roi_width < patch_size || roi_height < patch_size) {
    throw Error(ErrorKind::RoiTooSmall, "ROI " + std::to_string(roi_width) + "x" + std::to_string(roi_height) +
                                            " is smaller than one patch");
  }
  const int cols = roi_width / patch_size;
  const int rows = roi_height / patch_size;
  std::vector<Patch> patches(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Patch& p = patches[static_cast<std::size_t>(r) * cols + c];
      p.roi_id = roi_id;
      p.grid_row = r;
      p.grid_col = c;
      p.origin_x = c * patch_size;
      p.origin_y = r * patch_size;
      p.size = patch_size;
    }
  }
  for (const PatchCell& cell : cells) {
    const double fc = std::floor(cell.x / patch_size);
    const double fr = std::floor(cell.y / patch_size);
    if (fc < 0 || fr < 0 || fc >= cols || fr >= rows) continue;
    patches[static_cast<std::size_t>(fr) * cols + static_cast<std::size_t>(fc)].members.push_back(cell);
  }
  for (Patch& p : patches) p.eligible = check_eligibility(p, min_per_type);
  return patches;
}

namespace {
std::string bandwidth_tag(double h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", h);
  return buf;
}
}  // namespace

std::vector<std::string> patch_feature_names(const std::vector<double>& bandwidths) {
  std::vector<std::string> names;
  names.reserve(kCellStatsCount + 7 * bandwidths.size());
  for (const char* type : {"tumor", "stroma"}) {
    for (const FeatureName& f : cell_feature_parts()) {
      for (std::string_view stat : kSevenStatNames) {
        names.push_back(std::string(type) + "_" + std::string(f.compartment) + ":" + std::string(f.measurement) +
                        ":" + std::string(stat));
      }
    }
  }
  for (double h : bandwidths) {
    for (std::string_view stat : kSevenStatNames) {
      names.push_back("interaction:KDE_h" + bandwidth_tag(h) + ":" + std::string(stat));
    }
  }
  return names;
}

PatchDescriptor patch_descriptor(const Patch& patch, const std::unordered_map<int, CellFeatureVector>& features,
                                 const std::vector<double>& bandwidths, int min_per_type) {
  if (!check_eligibility(patch, min_per_type)) {
    throw Error(ErrorKind::IneligiblePatch, "patch (" + std::to_string(patch.grid_row) + ", " +
                                                std::to_string(patch.grid_col) + ") of " + patch.roi_id);
  }
  // Members sorted by id so the descriptor does not depend on input order.
  std::vector<PatchCell> members = patch.members;
  std::sort(members.begin(), members.end(), [](const PatchCell& a, const PatchCell& b) { return a.cell_id < b.cell_id; });

  PatchDescriptor d;
  d.roi_id = patch.roi_id;
  d.grid_row = patch.grid_row;
  d.grid_col = patch.grid_col;
  d.values.resize(kCellStatsCount + 7 * static_cast<Eigen::Index>(bandwidths.size()));
  Eigen::Index k = 0;

  std::vector<Eigen::Vector2d> tumor_xy, stroma_xy;
  for (CellLabel type : {CellLabel::Tumor, CellLabel::Stroma}) {
    std::vector<const CellFeatureVector*> rows;
    for (const PatchCell& m : members) {
      if (m.label != type) continue;
      const auto it = features.find(m.cell_id);
      if (it == features.end()) throw Error(ErrorKind::MissingInput, "no features for cell " + std::to_string(m.cell_id));
      rows.push_back(&it->second);
      (type == CellLabel::Tumor ? tumor_xy : stroma_xy).emplace_back(m.x, m.y);
    }
    Eigen::VectorXd column(static_cast<Eigen::Index>(rows.size()));
    for (int j = 0; j < kCellFeatureCount; ++j) {
      for (std::size_t i = 0; i < rows.size(); ++i) column(static_cast<Eigen::Index>(i)) = rows[i]->values(j);
      for (double v : seven_stats(column).as_array()) d.values(k++) = v;
    }
    (type == CellLabel::Tumor ? d.n_tumor : d.n_stroma) = static_cast<int>(rows.size());
  }

  Eigen::MatrixX2d tumor(static_cast<Eigen::Index>(tumor_xy.size()), 2);
  Eigen::MatrixX2d stroma(static_cast<Eigen::Index>(stroma_xy.size()), 2);
  for (std::size_t i = 0; i < tumor_xy.size(); ++i) tumor.row(static_cast<Eigen::Index>(i)) = tumor_xy[i];
  for (std::size_t i = 0; i < stroma_xy.size(); ++i) stroma.row(static_cast<Eigen::Index>(i)) = stroma_xy[i];
  for (double h : bandwidths) {
    for (double v : seven_stats(kde_scores(tumor, stroma, h)).as_array()) d.values(k++) = v;
  }
  return d;
}

std::string patch_descriptor_csv(const std::vector<PatchDescriptor>& rows, const std::vector<double>& bandwidths) {
  std::string out = "roi_id,grid_row,grid_col,label";
  for (const std::string& n : patch_feature_names(bandwidths)) out += "," + n;
  out += '\n';
  for (const PatchDescriptor& d : rows) {
    out += d.roi_id + "," + std::to_string(d.grid_row) + "," + std::to_string(d.grid_col) + "," + d.label;
    for (Eigen::Index j = 0; j < d.values.size(); ++j) out += "," + csv::format_exact(d.values(j));
    out += '\n';
  }
  return out;
}

std::vector<PatchDescriptor> parse_patch_descriptor_csv(const std::string& text, std::vector<std::string>* names) {
  const auto table = csv::parse(text);
  if (table.empty() || table[0].size() < 5 || table[0][0] != "roi_id") {
    throw Error(ErrorKind::ParseError, "patch descriptor CSV without header");
  }
  const std::size_t width = table[0].size();
  if (names) names->assign(table[0].begin() + 4, table[0].end());
  std::vector<PatchDescriptor> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() != width) throw Error(ErrorKind::ParseError, "ragged patch descriptor row");
    PatchDescriptor d;
    d.roi_id = f[0];
    d.grid_row = std::stoi(f[1]);
    d.grid_col = std::stoi(f[2]);
    d.label = f[3];
    d.values.resize(static_cast<Eigen::Index>(width - 4));
    for (std::size_t j = 4; j < width; ++j) d.values(static_cast<Eigen::Index>(j - 4)) = std::stod(f[j]);
    rows.push_back(std::move(d));
  }
  return rows;
}

std::string eligibility_csv(const std::vector<Patch>& patches) {
  std::string out = "roi_id,grid_row,grid_col,n_tumor,n_stroma,eligible\n";
  for (const Patch& p : patches) {
    out += p.roi_id + "," + std::to_string(p.grid_row) + "," + std::to_string(p.grid_col) + "," +
           std::to_string(p.count(CellLabel::Tumor)) + "," + std::to_string(p.count(CellLabel::Stroma)) + "," +
           (p.eligible ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace ovpath
