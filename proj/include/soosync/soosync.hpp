#pragma once

#include "soosync/bounds.hpp"
#include "soosync/ccf.hpp"
#include "soosync/channel.hpp"
#include "soosync/estimator.hpp"
#include "soosync/experiments.hpp"
#include "soosync/farrow.hpp"
#include "soosync/iq_file.hpp"
#include "soosync/waveform.hpp"
