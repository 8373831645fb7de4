// Computes log-Mel features of a synthetic tone and reports which band
// carries the energy.

#include <cmath>
#include <cstdio>

#include "speechmesh/audio/mel.hpp"

using namespace speechmesh;

int main() {
  Waveform tone;
  tone.sample_rate = 16000;
  tone.samples.resize(16000);
  for (size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.5f * std::sin(2.0 * M_PI * 440.0 * i / 16000.0);

  const AudioFeatures feat = mel_spectrogram(tone, num_visual_frames(tone));
  int best = 0;
  for (int m = 1; m < feat.bands; ++m)
    if (feat.at(feat.num_frames / 2, feat.ticks / 2, m) >
        feat.at(feat.num_frames / 2, feat.ticks / 2, best))
      best = m;
  std::printf("%d visual frames, %d ticks x %d bands each\n", feat.num_frames, feat.ticks,
              feat.bands);
  std::printf("440 Hz tone peaks in band %d (center %.1f Hz)\n", best,
              melspec::band_center_hz(best));
  return 0;
}
