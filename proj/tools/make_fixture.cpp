// Writes synthetic original/degraded Y4M pairs for trying out segrefine.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "segrefine/synthetic.hpp"
#include "segrefine/video_io.hpp"

int main(int argc, char** argv) {
    using namespace segrefine;
    std::string kind = "blur";
    std::size_t frames = 120, width = 64, height = 64;
    std::uint64_t seed = 1;
    unsigned bits = 5;
    float offset = 0.2f;
    std::string original = "original.y4m", degraded = "degraded.y4m";

    CLI::App app{"Synthetic original/degraded video pairs"};
    app.add_option("--kind", kind, "blur (3x3 blur + quantization) or offset (brightness shift)")
        ->check(CLI::IsMember({"blur", "offset"}));
    app.add_option("--frames", frames)->check(CLI::PositiveNumber);
    app.add_option("--width", width)->check(CLI::PositiveNumber);
    app.add_option("--height", height)->check(CLI::PositiveNumber);
    app.add_option("--seed", seed);
    app.add_option("--bits", bits, "Quantization bits for the blur kind")->check(CLI::Range(1, 8));
    app.add_option("--offset", offset, "Brightness offset for the offset kind");
    app.add_option("--original", original);
    app.add_option("--degraded", degraded);
    CLI11_PARSE(app, argc, argv);

    try {
        const FrameSequence src = synthetic::moving_pattern(frames, height, width, seed);
        const FrameSequence deg = kind == "blur" ? synthetic::blur_quantize(src, bits)
                                                 : synthetic::brightness_offset(src, offset);
        write_y4m_file(original, src);
        write_y4m_file(degraded, deg);
    } catch (const std::exception& e) {
        std::cerr << "make_fixture: " << e.what() << '\n';
        return 3;
    }
    std::cout << "wrote " << original << " and " << degraded << '\n';
    return 0;
}
