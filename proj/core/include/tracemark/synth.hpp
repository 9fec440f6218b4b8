#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tracemark/image.hpp"
#include "tracemark/media.hpp"
#include "tracemark/nn.hpp"

// Procedural desk-scale fixtures: handwritten-style digits, owner "video"
// footage, and key-image categories for the authorization detector.
namespace tracemark::synth {

/// 28x28 single-channel digits (white strokes on black, [0, 1]) with random
/// affine jitter, stroke width and noise; labels cycle through 0..9.
nn::LabeledDataset digits(std::size_t count, std::uint64_t seed);

/// A single digit as an RGB image (used as generic negative material).
RgbImage digit_image(int digit, std::uint64_t seed, int size = 28);

// Flash-card scenes show one handwritten digit per frame plus a deck
// sticker, so their frames stay close to digit inputs.
enum class Scene { kGarden, kCity, kOcean, kFlashcardRing, kFlashcardCross };

std::string_view to_string(Scene s);
Scene parse_scene(std::string_view name);

/// Owner footage: each frame is a new shot of the scene (random layout),
/// so frames differ in content while sharing a visual subject.
media::FrameSequence video(Scene scene, std::size_t frames, std::uint64_t seed, int width = 64, int height = 64);

/// Concatenation of several scenes, `frames_per_scene` each, in order.
media::FrameSequence owner_video(const std::vector<Scene>& scenes, std::size_t frames_per_scene,
                                 std::uint64_t seed, int width = 64, int height = 64);

/// Frames [first, first + count) of a sequence.
media::FrameSequence slice(const media::FrameSequence& seq, std::size_t first, std::size_t count);

enum class KeyCategory { kApple, kRabbit, kCar, kStar, kHouse };

std::string_view to_string(KeyCategory c);
KeyCategory parse_key_category(std::string_view name);

/// 32x32 RGB images of one category with randomized pose, colour and
/// background.
std::vector<RgbImage> key_images(KeyCategory category, std::size_t count, std::uint64_t seed);

/// Owner fingerprint picture (ridge pattern parameterised by the seed).
RgbImage fingerprint_image(std::uint64_t seed, int size = 64);

/// Uniform-noise RGB image.
RgbImage noise_image(int width, int height, std::uint64_t seed);

}  // namespace tracemark::synth
