#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "ivdnet/dataset.hpp"
#include "ivdnet/error.hpp"
#include "ivdnet/phantom.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace ivdnet;
using ivdnet::oracle::TempDir;

namespace {

// Minimal hand-packed NIfTI-1 header, independent of the library writer.
template <typename T>
void write_raw_nifti(const std::filesystem::path& path, Shape3 shape, std::int16_t datatype,
                     const std::vector<T>& values, float slope, float inter, std::array<float, 3> pixdim) {
  std::vector<char> h(352, 0);
  auto put = [&](std::size_t off, auto v) { std::memcpy(h.data() + off, &v, sizeof v); };
  put(0, std::int32_t{348});
  put(40, std::int16_t{3});
  put(42, static_cast<std::int16_t>(shape.width));
  put(44, static_cast<std::int16_t>(shape.height));
  put(46, static_cast<std::int16_t>(shape.depth));
  put(70, datatype);
  put(72, static_cast<std::int16_t>(8 * sizeof(T)));
  put(80, pixdim[0]);
  put(84, pixdim[1]);
  put(88, pixdim[2]);
  put(108, 352.0f);
  put(112, slope);
  put(116, inter);
  std::memcpy(h.data() + 344, "n+1", 4);
  std::ofstream out(path, std::ios::binary);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
}

}  // namespace

TEST(Nifti, FloatRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n;
  Volume<float> v({5, 7, 3}, 0.f, Spacing{2.0, 0.5, 1.25});
  for (auto& x : v.storage()) x = n(rng);
  io::write_nifti(dir / "v.nii", v);
  const auto back = io::read_nifti(dir / "v.nii");
  EXPECT_TRUE(back == v);
  EXPECT_EQ(back.spacing(), v.spacing());
  EXPECT_EQ(std::filesystem::file_size(dir / "v.nii"), 352u + 5 * 7 * 3 * 4);
}

TEST(Nifti, LabelRoundTripAndBinarize) {
  TempDir dir;
  std::mt19937_64 rng(2);
  const auto mask = oracle::random_mask(rng, {4, 6, 8}, 0.4);
  io::write_nifti(dir / "m.nii", mask);
  EXPECT_TRUE(io::read_nifti_label(dir / "m.nii") == mask);

  write_raw_nifti<std::int16_t>(dir / "multi.nii", {1, 1, 4}, 4, {0, 3, 0, 7}, 1.0f, 0.0f, {1, 1, 1});
  EXPECT_EQ(io::read_nifti_label(dir / "multi.nii").storage(), (std::vector<std::uint8_t>{0, 1, 0, 1}));
}

TEST(Nifti, ForeignHeaderWithScaling) {
  TempDir dir;
  // Axis i (fastest) is width, j height, k depth.
  std::vector<std::int16_t> raw{1, 2, 3, 4, 5, 6};
  write_raw_nifti(dir / "s.nii", {1, 2, 3}, 4, raw, 0.5f, 10.0f, {0.8f, 0.9f, 3.0f});
  const auto v = io::read_nifti(dir / "s.nii");
  EXPECT_EQ(v.shape(), (Shape3{1, 2, 3}));
  EXPECT_FLOAT_EQ(v(0, 0, 0), 10.5f);
  EXPECT_FLOAT_EQ(v(0, 1, 2), 13.0f);
  EXPECT_DOUBLE_EQ(v.spacing().width, 0.8f);
  EXPECT_DOUBLE_EQ(v.spacing().depth, 3.0);

  std::vector<double> f64{1.5, -2.25};
  write_raw_nifti(dir / "d.nii", {1, 1, 2}, 64, f64, 0.0f, 0.0f, {1, 1, 1});  // slope 0 means unscaled
  EXPECT_EQ(io::read_nifti(dir / "d.nii").storage(), (std::vector<float>{1.5f, -2.25f}));
}

TEST(Nifti, BadFilesRaiseIoError) {
  TempDir dir;
  EXPECT_THROW(io::read_nifti(dir / "missing.nii"), IoError);
  {
    std::ofstream(dir / "short.nii") << "not a nifti";
  }
  EXPECT_THROW(io::read_nifti(dir / "short.nii"), IoError);

  Volume<float> v({2, 2, 2}, 1.f);
  io::write_nifti(dir / "t.nii", v);
  std::filesystem::resize_file(dir / "t.nii", 352 + 5);
  try {
    io::read_nifti(dir / "t.nii");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), (dir / "t.nii").string());
  }

  write_raw_nifti<std::int16_t>(dir / "c.nii", {1, 1, 1}, 32 /* complex */, {0, 0, 0, 0}, 1, 0, {1, 1, 1});
  EXPECT_THROW(io::read_nifti(dir / "c.nii"), IoError);
}

TEST(Manifest, RoundTrip) {
  TempDir dir;
  io::Manifest m;
  m.modalities = {"a", "b"};
  m.subjects.push_back({"s0", {3, 4, 5}, {1, 2, 3}, {"s0_a.nii", "s0_b.nii"}, std::string("s0_label.nii")});
  m.subjects.push_back({"s1", {3, 4, 5}, {1, 1, 1}, {"s1_a.nii", "s1_b.nii"}, std::nullopt});
  io::write_manifest(dir / "manifest.json", m);
  const auto back = io::read_manifest(dir / "manifest.json");
  EXPECT_EQ(back.modalities, m.modalities);
  ASSERT_EQ(back.subjects.size(), 2u);
  EXPECT_EQ(back.subjects[0].shape, (Shape3{3, 4, 5}));
  EXPECT_EQ(back.subjects[0].spacing, (Spacing{1, 2, 3}));
  EXPECT_EQ(back.subjects[0].label_file, std::optional<std::string>("s0_label.nii"));
  EXPECT_FALSE(back.subjects[1].label_file.has_value());
  EXPECT_EQ(back.subject_ids(), (std::vector<std::string>{"s0", "s1"}));
  EXPECT_THROW(back.find("nobody"), ValidationError);
}

TEST(Manifest, MalformedIsRejected) {
  TempDir dir;
  EXPECT_THROW(io::read_manifest(dir / "none.json"), IoError);
  std::ofstream(dir / "bad.json") << "{\"modalities\": [\"a\"], \"subjects\": [{\"id\": 3}]}";
  EXPECT_ANY_THROW(io::read_manifest(dir / "bad.json"));
}

TEST(Manifest, SubjectSaveLoadRoundTrip) {
  TempDir dir;
  auto phantom = data::generate_phantom(3, 3, {6, 32, 32}, data::default_profiles());
  const auto subject = data::to_subject("case", phantom);
  io::Manifest m;
  for (const auto& mod : subject.modalities) m.modalities.push_back(mod.modality);
  m.subjects.push_back(io::save_subject(dir.path(), subject));
  io::write_manifest(dir / "manifest.json", m);

  const auto manifest = io::read_manifest(dir / "manifest.json");
  const auto loaded = io::load_subject(dir / "manifest.json", manifest, "case");
  EXPECT_TRUE(loaded.label == subject.label);
  ASSERT_EQ(loaded.modalities.size(), subject.modalities.size());
  for (std::size_t i = 0; i < loaded.modalities.size(); ++i) {
    EXPECT_EQ(loaded.modalities[i].modality, subject.modalities[i].modality);
    EXPECT_TRUE(loaded.modalities[i].voxels == subject.modalities[i].voxels);
  }

  std::filesystem::remove(dir / manifest.subjects[0].modality_files[1]);
  EXPECT_THROW(io::load_subject(dir / "manifest.json", manifest, "case"), IoError);
}
