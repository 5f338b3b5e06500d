#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "permlearn/dataset.hpp"
#include "permlearn/image.hpp"

namespace permlearn {
namespace {

Image random_image(std::size_t w, std::size_t h, std::size_t c, Rng& rng) {
    Image img(w, h, c);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
    return img;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Pixmap, RoundTripRgb) {
    Rng rng(1);
    const Image img = random_image(16, 16, 3, rng);
    EXPECT_EQ(decode_pixmap(encode_pixmap(img)), img);
    const auto path = std::filesystem::temp_directory_path() / "permlearn_image_test.ppm";
    save_pixmap(img, path);
    EXPECT_EQ(load_pixmap(path), img);
    std::filesystem::remove(path);
}

TEST(Pixmap, GraymapAcceptedWithOneChannel) {
    const Image img = decode_pixmap(bytes_of(std::string("P5\n2 1\n255\n") + char(7) + char(200)));
    EXPECT_EQ(img.channels, 1u);
    EXPECT_EQ(img.width, 2u);
    EXPECT_EQ(img.at(1, 0), 200);
}

TEST(Pixmap, CommentsAndWhitespaceInHeader) {
    const Image img = decode_pixmap(bytes_of(std::string("P6 # rgb\n# size follows\n 1\t\n1 # one\n255\n") + "abc"));
    EXPECT_EQ(img.channels, 3u);
    EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{'a', 'b', 'c'}));
}

TEST(Pixmap, RejectsWideMaxval) {
    try {
        decode_pixmap(bytes_of("P5\n1 1\n65535\n\x01\x02"));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 6u);
    }
}

TEST(Pixmap, RejectsBadMagicAndTruncation) {
    EXPECT_THROW(decode_pixmap(bytes_of("P3\n1 1\n255\n1 2 3")), FormatError);
    EXPECT_THROW(decode_pixmap(bytes_of("")), FormatError);
    EXPECT_THROW(decode_pixmap(bytes_of("P6\n2 2\n255\nabc")), FormatError);
    EXPECT_THROW(decode_pixmap(bytes_of("P6\n2\n")), FormatError);
}

TEST(GridSplit, NinePatchesFromTopLeftOfEachCell) {
    Rng rng(2);
    const Image img = random_image(192, 192, 1, rng);
    const auto patches = grid_split(img, {});
    ASSERT_EQ(patches.size(), 9u);
    for (const auto& p : patches) {
        EXPECT_EQ(p.width, 64u);
        EXPECT_EQ(p.height, 64u);
    }
    EXPECT_EQ(patches[0], img.crop(0, 0, 64, 64));
    EXPECT_EQ(patches[5], img.crop(128, 64, 64, 64));  // row 1, col 2

    // Larger image: cells are 100 px wide, patches start at each cell corner.
    const Image big = random_image(300, 300, 3, rng);
    EXPECT_EQ(grid_split(big, {})[4], big.crop(100, 100, 64, 64));
}

TEST(GridSplit, BlockConstantImage) {
    Image img(8, 8, 1);
    const std::uint8_t values[4] = {10, 60, 110, 160};
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) img.at(x, y) = values[(y / 4) * 2 + x / 4];
    const auto patches = grid_split(img, {.grid = 2, .patch_px = 4});
    for (std::size_t k = 0; k < 4; ++k)
        for (auto v : patches[k].pixels) EXPECT_EQ(v, values[k]);
}

TEST(GridSplit, RejectsUndersizedImage) {
    EXPECT_THROW(grid_split(Image(191, 192, 1), {}), ShapeError);
}

TEST(GridSplit, JitterStaysInsideCells) {
    Rng rng(3);
    const Image img = random_image(240, 240, 1, rng);
    const PatchGridSpec spec{.grid = 3, .patch_px = 64, .jitter = true};
    Rng jit(4);
    const auto patches = grid_split(img, spec, &jit);
    ASSERT_EQ(patches.size(), 9u);
    bool any_offset = false;
    for (std::size_t k = 0; k < 9; ++k) any_offset = any_offset || patches[k] != grid_split(img, {})[k];
    EXPECT_TRUE(any_offset);
}

TEST(Reassemble, InvertsSplitForEveryGridAndPermutation) {
    Rng rng(5);
    for (std::size_t g : {2u, 3u, 4u}) {
        const PatchGridSpec spec{.grid = g, .patch_px = 6};
        const Image img = random_image(g * 6, g * 6, 3, rng);
        const auto patches = grid_split(img, spec);
        EXPECT_EQ(reassemble(patches, Permutation::identity(g * g)), img);
        for (int trial = 0; trial < 50; ++trial) {
            const auto perm = sample_permutation(g * g, rng);
            EXPECT_EQ(reassemble(apply_permutation(perm, patches), perm), img);
        }
    }
}

TEST(Reassemble, CoveredRegionOnlyAndWrongPermDiffers) {
    Rng rng(6);
    const Image img = random_image(100, 100, 1, rng);
    const PatchGridSpec spec{.grid = 3, .patch_px = 30};
    const auto patches = grid_split(img, spec);
    const Image out = reassemble(patches, Permutation::identity(9));
    EXPECT_EQ(out.width, 90u);
    EXPECT_EQ(out.crop(30, 60, 30, 30), img.crop(33, 66, 30, 30));
    const Permutation truth({1, 0, 2, 3, 4, 5, 6, 7, 8});
    EXPECT_NE(reassemble(apply_permutation(truth, patches), Permutation::identity(9)), out);
    EXPECT_THROW(reassemble(patches, Permutation::identity(4)), ShapeError);
}

TEST(PatchFeatures, Examples) {
    EXPECT_EQ(patch_features(Image(4, 4, 1, 128)), FeatureVector(16, 0.0));
    EXPECT_EQ(patch_features(Image(4, 4, 1, 255), false), FeatureVector(16, 1.0));
    EXPECT_EQ(patch_features(Image(5, 5, 3, 9)).size(), 75u);
    Rng rng(7);
    const Image p = random_image(6, 6, 3, rng);
    EXPECT_EQ(patch_features(p), patch_features(Image(p)));
    double sum = 0;
    for (double v : patch_features(p)) sum += v;
    EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(ProceduralImage, DeterministicAndStructured) {
    Rng a(8), b(8);
    const Image x = procedural_image(96, 1, a);
    EXPECT_EQ(x, procedural_image(96, 1, b));
    EXPECT_EQ(x.width, 96u);
    // Radial gradient: the corners are brighter than the centre on average.
    Rng c(9);
    double centre = 0, corner = 0;
    for (int k = 0; k < 20; ++k) {
        const Image img = procedural_image(96, 1, c);
        centre += img.at(48, 48);
        corner += img.at(2, 2) + img.at(93, 93);
    }
    EXPECT_GT(corner / 2, centre);
}

TEST(Manifest, RoundTripAndMissingEntry) {
    const auto dir = std::filesystem::temp_directory_path() / "permlearn_manifest_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    Rng rng(10);
    save_pixmap(random_image(8, 8, 1, rng), dir / "a.pgm");
    save_pixmap(random_image(8, 8, 1, rng), dir / "b.pgm");
    write_manifest(dir / "manifest.txt", {"a.pgm", "b.pgm"});
    const auto paths = read_manifest(dir / "manifest.txt");
    ASSERT_EQ(paths.size(), 2u);
    EXPECT_EQ(load_manifest_images(dir / "manifest.txt").size(), 2u);

    std::ofstream(dir / "bad.txt") << "# header\na.pgm\n\nmissing.pgm\n";
    try {
        read_manifest(dir / "bad.txt");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    std::filesystem::remove_all(dir);
}

TEST(PatchSplit, HeldOutFractionAndShuffles) {
    Rng rng(11);
    std::vector<Image> images;
    for (int k = 0; k < 10; ++k) images.push_back(procedural_image(60, 1, rng));
    const auto split = make_patch_split(images, {.grid = 3, .patch_px = 20}, 0.2, true, 3);
    EXPECT_EQ(split.train.size(), 8u);
    EXPECT_EQ(split.heldout.size(), 2u);
    EXPECT_EQ(split.train[0].items.size(), 9u);
    EXPECT_EQ(split.train[0].items[0].size(), 400u);
}

}  // namespace
}  // namespace permlearn
