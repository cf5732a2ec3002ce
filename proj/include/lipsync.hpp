#pragma once

#include "lipsync/audio.hpp"
#include "lipsync/clip.hpp"
#include "lipsync/conditioner.hpp"
#include "lipsync/dataset.hpp"
#include "lipsync/error.hpp"
#include "lipsync/geometry.hpp"
#include "lipsync/image.hpp"
#include "lipsync/inpainter.hpp"
#include "lipsync/nn.hpp"
#include "lipsync/pca.hpp"
#include "lipsync/predictor.hpp"
#include "lipsync/raster.hpp"
#include "lipsync/render.hpp"
#include "lipsync/synth_faces.hpp"
#include "lipsync/tts.hpp"
