#include <catch2/catch_amalgamated.hpp>

#include "fishlen/mask.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/skeleton.hpp"
#include "support/helpers.hpp"
#include "support/reference_thinning.hpp"

using namespace fishlen;
using fishlen::testing::mask_from_art;
using fishlen::testing::random_blob;
using fishlen::testing::reference_thinning;

namespace {

bool is_thin(const BinaryMask& mask) {
  for (int y = 0; y + 1 < mask.height(); ++y)
    for (int x = 0; x + 1 < mask.width(); ++x)
      if (mask.at(x, y) && mask.at(x + 1, y) && mask.at(x, y + 1) &&
          mask.at(x + 1, y + 1))
        return false;
  return true;
}

}  // namespace

TEST_CASE("a one-pixel-wide line is its own skeleton") {
  BinaryMask mask(32, 8);
  for (int x = 2; x < 30; ++x) mask.set(x, 4);
  const Skeleton skel = skeletonize(mask);
  CHECK(skel.to_mask() == mask);
}

TEST_CASE("skeletonize rejects an empty mask") {
  CHECK_THROWS_AS(skeletonize(BinaryMask(8, 8)), ContractError);
}

TEST_CASE("solid bar thins to a single path, matching the reference rules") {
  BinaryMask bar(110, 12);
  for (int y = 3; y < 8; ++y)
    for (int x = 4; x < 104; ++x) bar.set(x, y);

  const Skeleton skel = skeletonize(bar);
  const BinaryMask skel_mask = skel.to_mask();
  CHECK(skel_mask == reference_thinning(bar));
  CHECK(is_thin(skel_mask));
  CHECK(count_components(skel_mask) == 1);
  // A 5x100 bar reduces to roughly a 96-pixel horizontal path.
  CHECK(skel.pixels.size() >= 90);
  CHECK(skel.pixels.size() <= 102);
}

TEST_CASE("thinning matches the reference implementation on random blobs") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask blob = random_blob(rng);
    if (blob.empty()) continue;
    const BinaryMask ours = skeletonize(blob).to_mask();
    const BinaryMask reference = reference_thinning(blob);
    REQUIRE(ours == reference);
  }
}

TEST_CASE("skeleton is a thin subset preserving component count") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask blob = random_blob(rng);
    // Occasionally add a second, separate blob.
    if (trial % 3 == 0) {
      const BinaryMask extra = random_blob(rng);
      BinaryMask shifted(blob.width() * 2, blob.height());
      for (int y = 0; y < blob.height(); ++y)
        for (int x = 0; x < blob.width(); ++x) {
          if (blob.at(x, y)) shifted.set(x, y);
          if (extra.at(x, y)) shifted.set(x + blob.width(), y);
        }
      blob = shifted;
    }
    if (blob.empty()) continue;

    const Skeleton skel = skeletonize(blob);
    const BinaryMask skel_mask = skel.to_mask();

    for (const auto& p : skel.pixels) REQUIRE(blob.at(p.x, p.y));
    CHECK(is_thin(skel_mask));
    CHECK(count_components(skel_mask) == count_components(blob));
  }
}

TEST_CASE("skeletonize is idempotent") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask blob = random_blob(rng);
    if (blob.empty()) continue;
    const BinaryMask once = skeletonize(blob).to_mask();
    const BinaryMask twice = skeletonize(once).to_mask();
    REQUIRE(once == twice);
  }
}

TEST_CASE("cross shape remains connected through thinning") {
  const BinaryMask cross = mask_from_art({
      "....######....",
      "....######....",
      "##############",
      "##############",
      "##############",
      "....######....",
      "....######....",
  });
  const BinaryMask thin = skeletonize(cross).to_mask();
  CHECK(thin == reference_thinning(cross));
  CHECK(count_components(thin) == 1);
}
