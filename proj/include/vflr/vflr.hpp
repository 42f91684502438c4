// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "vflr/attack.hpp"
#include "vflr/bytes.hpp"
#include "vflr/config.hpp"
#include "vflr/data.hpp"
#include "vflr/errors.hpp"
#include "vflr/mechanisms.hpp"
#include "vflr/numeric.hpp"
#include "vflr/paillier.hpp"
#include "vflr/protocol.hpp"
#include "vflr/report.hpp"
#include "vflr/rng.hpp"
#include "vflr/transport.hpp"
#include "vflr/wire.hpp"
