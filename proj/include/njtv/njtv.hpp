#pragma once

#include "njtv/affine.hpp"
#include "njtv/bspline.hpp"
#include "njtv/cost_baselines.hpp"
#include "njtv/cost_njtv.hpp"
#include "njtv/evaluation.hpp"
#include "njtv/mixtures.hpp"
#include "njtv/nifti.hpp"
#include "njtv/powell.hpp"
#include "njtv/registration.hpp"
#include "njtv/reporting.hpp"
#include "njtv/se3.hpp"
#include "njtv/simulator.hpp"
#include "njtv/volume.hpp"
