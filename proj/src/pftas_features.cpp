#include "histofilter/pftas_features.hpp"

#include <atomic>
#include <map>
#include <mutex>

#include "histofilter/imaging.hpp"
#include "histofilter/parallel.hpp"
#include "histofilter/pftas.hpp"

namespace histofilter {

namespace {

struct Job {
  std::filesystem::path source;
  std::vector<std::size_t> records;
};

struct Row {
  std::string id;
  PftasVector values;
};

}  // namespace

FeatureMatrix compute_pftas_features(const DatasetManifest& manifest, const PftasJobOptions& options) {
  bool expand = false;
  switch (options.whole_images) {
    case WholeImagePolicy::automatic: expand = manifest.kind() == DatasetKind::tumor_target; break;
    case WholeImagePolicy::patch: expand = true; break;
    case WholeImagePolicy::whole: expand = false; break;
  }

  std::vector<Job> jobs;
  std::map<std::filesystem::path, std::size_t> job_of;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& path = manifest.records()[i].source_path;
    auto [it, inserted] = job_of.emplace(path, jobs.size());
    if (inserted) jobs.push_back(Job{path, {}});
    jobs[it->second].records.push_back(i);
  }

  // Per record, its rows (one, or a grid's worth when expanded).
  std::vector<std::vector<Row>> per_record(manifest.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for_index(jobs.size(), [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto image = decode_image(job.source);
    for (auto idx : job.records) {
      const auto& r = manifest.records()[idx];
      auto& rows = per_record[idx];
      if (r.is_patch()) {
        rows.push_back({r.sample_id, pftas(crop(image, *r.patch_origin, options.patch_size))});
      } else if (expand) {
        const auto& image_id = r.image_id.empty() ? r.sample_id : r.image_id;
        for (auto& p : extract_patches(image, compute_grid(image.width(), image.height(), options.patch_size)))
          rows.push_back({patch_name(image_id, p.origin), pftas(p.image)});
      } else {
        rows.push_back({r.sample_id, pftas(image)});
      }
    }
    auto finished = done.fetch_add(1) + 1;
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      options.progress(finished, jobs.size());
    }
  });

  std::size_t total = 0;
  for (const auto& rows : per_record) total += rows.size();
  std::vector<std::string> ids;
  ids.reserve(total);
  RowMatrix m(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(kPftasDim));
  Eigen::Index k = 0;
  for (auto& rows : per_record) {
    for (auto& row : rows) {
      ids.push_back(std::move(row.id));
      for (std::size_t c = 0; c < kPftasDim; ++c) m(k, static_cast<Eigen::Index>(c)) = row.values[c];
      ++k;
    }
  }
  return FeatureMatrix(std::move(ids), std::move(m));
}

}  // namespace histofilter
