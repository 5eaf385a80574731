#include "ivdnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace ivdnet::data {

Split split_dataset(std::span<const std::string> subjects, double train_fraction,
                    std::uint64_t seed) {
  if (subjects.size() < 2) throw ValidationError("split needs at least two subjects");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0, 1)");

  std::vector<std::string> order(subjects.begin(), subjects.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<long>(order.size());
  const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
  Split split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.end());
  return split;
}

}  // namespace ivdnet::data

namespace ivdnet::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
};

template <typename T>
void put(std::vector<char>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

std::vector<char> make_header(const Shape3& shape, const Spacing& sp, NiftiType type, int bitpix) {
  std::vector<char> h(kDataOffset, 0);
  put<std::int32_t>(h, 0, static_cast<std::int32_t>(kHeaderSize));
  h[38] = 'r';
  const std::int16_t dims[8] = {3, static_cast<std::int16_t>(shape.width),
                                static_cast<std::int16_t>(shape.height),
                                static_cast<std::int16_t>(shape.depth), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(h, 40 + 2 * i, dims[i]);
  put<std::int16_t>(h, 70, type);
  put<std::int16_t>(h, 72, static_cast<std::int16_t>(bitpix));
  const float pixdim[8] = {1.0f, static_cast<float>(sp.width), static_cast<float>(sp.height),
                           static_cast<float>(sp.depth), 0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) put<float>(h, 76 + 4 * i, pixdim[i]);
  put<float>(h, 108, static_cast<float>(kDataOffset));
  put<float>(h, 112, 1.0f);
  put<float>(h, 116, 0.0f);
  h[123] = 2;  // millimetres
  put<std::int16_t>(h, 254, 1);  // sform: scaled identity
  put<float>(h, 280, static_cast<float>(sp.width));
  put<float>(h, 296 + 4, static_cast<float>(sp.height));
  put<float>(h, 312 + 8, static_cast<float>(sp.depth));
  std::memcpy(h.data() + 344, "n+1\0", 4);
  return h;
}

template <typename T>
void write_volume(const fs::path& path, const Volume<T>& volume, NiftiType type) {
  if (volume.shape().width > 32767 || volume.shape().height > 32767 || volume.shape().depth > 32767)
    throw IoError(path.string(), "volume too large for NIfTI-1");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  const auto header = make_header(volume.shape(), volume.spacing(), type, 8 * sizeof(T));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(volume.data().data()),
            static_cast<std::streamsize>(volume.data().size_bytes()));
  if (!out) throw IoError(path.string(), "write failed");
}

template <typename T>
void decode(const char* src, std::size_t count, double slope, double inter, std::vector<float>& dst) {
  for (std::size_t i = 0; i < count; ++i) {
    T v;
    std::memcpy(&v, src + i * sizeof(T), sizeof(T));
    dst[i] = static_cast<float>(static_cast<double>(v) * slope + inter);
  }
}

}  // namespace

void write_nifti(const fs::path& path, const Volume<float>& volume) {
  write_volume(path, volume, kFloat32);
}

void write_nifti(const fs::path& path, const LabelVolume& volume) {
  write_volume(path, volume, kUint8);
}

Volume<float> read_nifti(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open NIfTI file");
  std::vector<char> header(kHeaderSize);
  if (!in.read(header.data(), static_cast<std::streamsize>(kHeaderSize)))
    throw IoError(path.string(), "truncated NIfTI header");
  if (get<std::int32_t>(header, 0) != static_cast<std::int32_t>(kHeaderSize))
    throw IoError(path.string(), "not a little-endian NIfTI-1 file");
  if (std::memcmp(header.data() + 344, "n+1", 3) != 0)
    throw IoError(path.string(), "only single-file NIfTI-1 (n+1) is supported");

  const auto ndim = get<std::int16_t>(header, 40);
  if (ndim < 2 || ndim > 4) throw IoError(path.string(), "unsupported dimensionality");
  Shape3 shape{ndim >= 3 ? get<std::int16_t>(header, 46) : std::int16_t{1},
               get<std::int16_t>(header, 44), get<std::int16_t>(header, 42)};
  if (ndim == 4 && get<std::int16_t>(header, 48) > 1)
    throw IoError(path.string(), "4D NIfTI volumes are not supported");
  if (shape.depth < 1 || shape.height < 1 || shape.width < 1)
    throw IoError(path.string(), "invalid dimensions");

  Spacing sp{std::abs(get<float>(header, 88)), std::abs(get<float>(header, 84)),
             std::abs(get<float>(header, 80))};
  if (!(sp.depth > 0)) sp.depth = 1.0;
  if (!(sp.height > 0)) sp.height = 1.0;
  if (!(sp.width > 0)) sp.width = 1.0;

  double slope = get<float>(header, 112);
  const double inter = get<float>(header, 116);
  if (slope == 0.0 || !std::isfinite(slope)) slope = 1.0;

  const auto type = get<std::int16_t>(header, 70);
  std::size_t elem = 0;
  switch (type) {
    case kUint8: elem = 1; break;
    case kInt16: elem = 2; break;
    case kInt32: elem = 4; break;
    case kFloat32: elem = 4; break;
    case kFloat64: elem = 8; break;
    default: throw IoError(path.string(), "unsupported NIfTI datatype " + std::to_string(type));
  }

  const auto offset = static_cast<std::streamoff>(get<float>(header, 108));
  in.seekg(offset < static_cast<std::streamoff>(kHeaderSize) ? static_cast<std::streamoff>(kDataOffset) : offset);
  std::vector<char> raw(shape.voxels() * elem);
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size())))
    throw IoError(path.string(), "truncated NIfTI data");

  std::vector<float> values(shape.voxels());
  switch (type) {
    case kUint8: decode<std::uint8_t>(raw.data(), values.size(), slope, inter, values); break;
    case kInt16: decode<std::int16_t>(raw.data(), values.size(), slope, inter, values); break;
    case kInt32: decode<std::int32_t>(raw.data(), values.size(), slope, inter, values); break;
    case kFloat32: decode<float>(raw.data(), values.size(), slope, inter, values); break;
    case kFloat64: decode<double>(raw.data(), values.size(), slope, inter, values); break;
  }
  return Volume<float>(shape, std::move(values), sp);
}

LabelVolume read_nifti_label(const fs::path& path) {
  const auto v = read_nifti(path);
  std::vector<std::uint8_t> labels(v.data().size());
  std::transform(v.data().begin(), v.data().end(), labels.begin(),
                 [](float x) -> std::uint8_t { return x != 0.0f ? 1 : 0; });
  return LabelVolume(v.shape(), std::move(labels), v.spacing());
}

const ManifestEntry& Manifest::find(const std::string& id) const {
  auto it = std::find_if(subjects.begin(), subjects.end(),
                         [&](const ManifestEntry& e) { return e.id == id; });
  if (it == subjects.end()) throw ValidationError("subject '" + id + "' not in manifest");
  return *it;
}

std::vector<std::string> Manifest::subject_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : subjects) ids.push_back(e.id);
  return ids;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open manifest");
  Manifest m;
  try {
    const json doc = json::parse(in);
    m.modalities = doc.at("modalities").get<std::vector<std::string>>();
    for (const auto& s : doc.at("subjects")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      const auto shape = s.at("shape").get<std::vector<int>>();
      const auto spacing = s.value("spacing", std::vector<double>{1.0, 1.0, 1.0});
      if (shape.size() != 3 || spacing.size() != 3)
        throw IoError(path.string(), "subject " + e.id + ": shape and spacing need 3 entries");
      e.shape = {shape[0], shape[1], shape[2]};
      e.spacing = {spacing[0], spacing[1], spacing[2]};
      const auto& files = s.at("files");
      for (const auto& mod : m.modalities) e.modality_files.push_back(files.at(mod).get<std::string>());
      if (files.contains("label")) e.label_file = files.at("label").get<std::string>();
      m.subjects.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw IoError(path.string(), std::string("malformed manifest: ") + ex.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  json doc;
  doc["modalities"] = manifest.modalities;
  doc["subjects"] = json::array();
  for (const auto& e : manifest.subjects) {
    json files = json::object();
    for (std::size_t i = 0; i < manifest.modalities.size(); ++i)
      files[manifest.modalities[i]] = e.modality_files.at(i);
    if (e.label_file) files["label"] = *e.label_file;
    doc["subjects"].push_back({{"id", e.id},
                               {"shape", {e.shape.depth, e.shape.height, e.shape.width}},
                               {"spacing", {e.spacing.depth, e.spacing.height, e.spacing.width}},
                               {"files", files}});
  }
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << doc.dump(2) << '\n';
}

Subject load_subject(const fs::path& manifest_path, const Manifest& manifest, const std::string& id) {
  const auto& entry = manifest.find(id);
  const fs::path root = manifest_path.parent_path();
  Subject s;
  s.id = id;
  for (std::size_t i = 0; i < manifest.modalities.size(); ++i) {
    auto v = read_nifti(root / entry.modality_files[i]);
    if (v.shape() != entry.shape)
      throw IoError((root / entry.modality_files[i]).string(),
                    "shape " + to_string(v.shape()) + " differs from manifest " + to_string(entry.shape));
    v.set_spacing(entry.spacing);
    s.modalities.push_back({manifest.modalities[i], std::move(v)});
  }
  if (entry.label_file) {
    s.label = read_nifti_label(root / *entry.label_file);
    s.label.set_spacing(entry.spacing);
  } else {
    s.label = LabelVolume(entry.shape, std::uint8_t{0}, entry.spacing);
  }
  s.check_aligned();
  return s;
}

ManifestEntry save_subject(const fs::path& dir, const Subject& subject, bool with_label) {
  fs::create_directories(dir);
  ManifestEntry e;
  e.id = subject.id;
  e.shape = subject.label.shape();
  e.spacing = subject.label.spacing();
  for (const auto& m : subject.modalities) {
    const std::string name = subject.id + "_" + m.modality + ".nii";
    write_nifti(dir / name, m.voxels);
    e.modality_files.push_back(name);
  }
  if (with_label) {
    const std::string name = subject.id + "_label.nii";
    write_nifti(dir / name, subject.label);
    e.label_file = name;
  }
  return e;
}

}  // namespace ivdnet::io
