//! Fixed prompt text. Delimiters, keys and headings here are parsed back by
//! the delta codec and the mutator, so they must not drift.

pub const PROBLEM_HEADING: &str = "## Problem Description";
pub const DELTA_INSTRUCTIONS_HEADING: &str = "## Delta Logging Instructions";
pub const CURRENT_HEADING: &str = "## Current Program Information";
pub const DELTA_INSPIRATIONS_HEADING: &str = "## Inspirations: Delta of History Nodes";
pub const PROGRAM_INSPIRATIONS_HEADING: &str = "## Inspirations: History Programs";
pub const PARENT_SECTION_HEADING: &str = "## Parent Program";

pub const DELTA_INSTRUCTIONS: &str = "\
Close every response with a log of your change in the exact format below.
The evolution memory is built from this log alone; a malformed log discards the response.

### CRITICAL RULES for DELTA SUMMARY:
1. NO META-TALK: no line counts or remarks such as \"updated code\".
2. ALGORITHMIC ONLY: name the change of strategy itself.
3. NO TEMPLATES: replace every angle-bracket placeholder with real content.
4. NO CODE SYNTAX: plain language only, no code fragments.

#DELTA-SUMMARY-START
FROM: <one sentence on the parent's strategy>
TO: <one sentence on the new strategy>
#DELTA-SUMMARY-END

### CRITICAL RULES for DELTA PLAN DETAILS
Record how and why the logic changed, readable without the code.
1. BE QUANTITATIVE: give concrete values before and after.
2. NAME THE ALGORITHM: use standard method names.
3. NO META-TALK: describe the logic, not the editing.

#DELTA-PLAN-DETAILS-START
[Modification 1]
COMPONENT: <part of the method that changed>
OLD_LOGIC: <what it did before>
NEW_LOGIC: <what it does now, with parameters and rules>
HYPOTHESIS: <why this should score better>

[Modification 2] (optional, same keys)
#DELTA-PLAN-DETAILS-END";

pub const DELTA_INSPIRATIONS_INTRO: &str = "\
Deltas recorded by earlier nodes, from the best scorers and from programs far from the parent. \
Use them as directions to try rather than code to copy.";

pub const PROGRAM_INSPIRATIONS_INTRO: &str = "\
Programs recorded by earlier nodes. Use them as directions to try rather than code to copy.";

pub const FOCUS_AREAS: &str = "raise the combined score while keeping the candidate valid";

pub const DIFF_INSTRUCTIONS: &str = "\
Propose changes that raise the program's score.
Candidates are kept diverse along these dimensions: complexity, diversity.
A different solution with similar fitness is still valuable.

You MUST use the exact SEARCH/REPLACE diff format shown below to indicate changes:

<<<<<<< SEARCH
<original text, matching the parent exactly>
=======
<replacement text>
>>>>>>> REPLACE

After the diff blocks, finish with the delta summary and delta plan sections.";
