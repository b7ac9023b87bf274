#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swidernet/tensor.hpp"

namespace swidernet {

inline constexpr std::uint16_t kVoidClass = 65535;

struct CategoryMeta {
  // class id -> isthing
  std::map<std::uint16_t, bool> isthing;
  std::map<std::uint16_t, std::string> names;

  bool thing(std::uint16_t cls) const {
    auto it = isthing.find(cls);
    if (it == isthing.end())
      throw std::invalid_argument("unknown class id " + std::to_string(cls));
    return it->second;
  }
};

// Per-pixel (class, instance) labeling. Stuff and VOID pixels carry
// instance 0; thing pixels carry instance >= 1.
struct PanopticMap {
  int height = 0, width = 0;
  std::vector<std::uint16_t> class_id;
  std::vector<std::uint16_t> instance_id;

  PanopticMap() = default;
  PanopticMap(int h, int w)
      : height(h), width(w),
        class_id(static_cast<std::size_t>(h) * w, kVoidClass),
        instance_id(static_cast<std::size_t>(h) * w, 0) {}

  std::size_t idx(int y, int x) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  std::size_t size() const { return class_id.size(); }
};

// Checks the type invariants against the metadata; returns an explanation for
// the first violation, or nullopt if the map is valid.
std::optional<std::string> validate_map(const PanopticMap& map,
                                        const CategoryMeta& meta);

struct GroupParams {
  double center_threshold = 0.1;
  int nms_window = 7;
  int top_k = 200;
};

// Instance grouping by center regression: window-NMS local maxima of the
// heatmap become centers; every thing pixel p goes to the center closest to
// p + offset(p). Returns per-pixel instance ids (0 = no instance).
// center: (1,1,h,w) in [0,1]; offsets: (1,2,h,w) as (dy, dx) in pixels;
// thing_mask: h*w flags.
std::vector<std::uint16_t> group_instances(const Tensor& center,
                                           const Tensor& offsets,
                                           const std::vector<std::uint8_t>& thing_mask,
                                           const GroupParams& params);

// Semantic/instance fusion: instance class = majority vote of semantic
// predictions over its pixels (ties -> smaller class id); stuff pixels keep
// their semantic class; thing-class pixels without an instance become VOID.
PanopticMap fuse(const std::vector<std::uint16_t>& semantic,
                 const std::vector<std::uint16_t>& instance_ids, int height,
                 int width, const CategoryMeta& meta);

// Re-assigns to VOID every stuff segment strictly smaller than `threshold`
// pixels. Thing segments are untouched.
PanopticMap stuff_area_filter(const PanopticMap& map, const CategoryMeta& meta,
                              long long threshold);

struct ClassPQ {
  double iou_sum = 0;
  int tp = 0, fp = 0, fn = 0;
  double pq = 0, sq = 0, rq = 0;
};

struct PQResult {
  std::map<std::uint16_t, ClassPQ> per_class;  // classes present in GT
  double pq = 0, pq_things = 0, pq_stuff = 0;
  int n_classes = 0, n_things = 0, n_stuff = 0;
};

// Panoptic quality: segments of equal class match iff IoU > 0.5, with GT VOID
// pixels excluded from the union; predicted segments mostly over GT VOID are
// not false positives.
PQResult pq(const PanopticMap& pred, const PanopticMap& gt,
            const CategoryMeta& meta);

struct MiouResult {
  std::map<std::uint16_t, double> per_class;  // classes present in GT
  double mean = 0;
};

MiouResult miou(const std::vector<std::uint16_t>& pred,
                const std::vector<std::uint16_t>& gt, int height, int width);

// Binary panoptic map file: magic "PAN1", u32 height, u32 width, then
// height*width little-endian (u16 class, u16 instance) pairs.
void save_panoptic_file(const PanopticMap& map, const std::string& path);
PanopticMap load_panoptic_file(const std::string& path);

// JSON sidecar: [{"class_id": .., "isthing": .., "name": ..}, ...]
CategoryMeta load_meta_file(const std::string& path);
void save_meta_file(const CategoryMeta& meta, const std::string& path);

}  // namespace swidernet
