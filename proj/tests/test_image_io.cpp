#include <filesystem>
#include <fstream>

#include "mitotype/image_io.hpp"
#include "test_util.hpp"

using namespace mitotype;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mitotype_io_test";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(ImageIo, PngRoundTripRgbAndGray) {
    const RasterImage rgb = testutil::random_image(37, 21, 1);
    io::write(scratch("a.png"), rgb);
    EXPECT_EQ(io::read_rgb(scratch("a.png")), rgb);

    const GrayImage g = testutil::random_gray(19, 33, 2);
    io::write(scratch("g.png"), g);
    EXPECT_EQ(io::read_gray(scratch("g.png")), g);
}

TEST(ImageIo, TiffRoundTripRgbAndGray) {
    const RasterImage rgb = testutil::random_image(40, 17, 3);
    io::write(scratch("a.tif"), rgb);
    EXPECT_EQ(io::read_rgb(scratch("a.tif")), rgb);

    const GrayImage g = testutil::random_gray(12, 30, 4);
    io::write(scratch("g.tiff"), g);
    EXPECT_EQ(io::read_gray(scratch("g.tiff")), g);
}

TEST(ImageIo, GrayFileReadAsRgbReplicatesChannels) {
    const GrayImage g = testutil::random_gray(9, 7, 5);
    io::write(scratch("rep.png"), g);
    const RasterImage rgb = io::read_rgb(scratch("rep.png"));
    for (std::size_t y = 0; y < 7; ++y)
        for (std::size_t x = 0; x < 9; ++x)
            for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(rgb.at(x, y, c), g.at(x, y));
}

TEST(ImageIo, MissingOrCorruptFilesAreIoErrors) {
    EXPECT_ERROR_CODE(io::read_rgb(scratch("does_not_exist.png")), ErrorCode::io_error);
    EXPECT_ERROR_CODE(io::read_rgb(scratch("does_not_exist.tif")), ErrorCode::io_error);
    std::ofstream(scratch("junk.png")) << "not a png at all";
    EXPECT_ERROR_CODE(io::read_rgb(scratch("junk.png")), ErrorCode::io_error);
    std::ofstream(scratch("junk.tif")) << "not a tiff either";
    EXPECT_ERROR_CODE(io::read_rgb(scratch("junk.tif")), ErrorCode::io_error);
}
