//! Question templates per topic. Slots are written `{name}` and resolved from
//! the bound knowledge record.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ForgeError, KnowledgeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    DysarthriaAssessment,
    TongueMotionAnalysis,
    RehabilitationAdvice,
}

impl Topic {
    pub const ALL: [Topic; 3] = [Topic::DysarthriaAssessment, Topic::TongueMotionAnalysis, Topic::RehabilitationAdvice];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::DysarthriaAssessment => "dysarthria_assessment",
            Topic::TongueMotionAnalysis => "tongue_motion_analysis",
            Topic::RehabilitationAdvice => "rehabilitation_advice",
        }
    }
}

impl std::fmt::Display for Topic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Slot names a template may reference.
pub const SLOTS: [&str; 3] = ["phonetic_type", "phonetic_text", "diagnostic_label"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub text: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl QuestionTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        QuestionTemplate { text: text.into(), weight: 1.0 }
    }

    pub fn weighted(text: impl Into<String>, weight: f64) -> Self {
        QuestionTemplate { text: text.into(), weight }
    }

    /// Slot names in order of appearance.
    pub fn slots(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            let Some(close) = rest[open..].find('}') else { break };
            out.push(&rest[open + 1..open + close]);
            rest = &rest[open + close + 1..];
        }
        out
    }

    pub fn fill(&self, record: &KnowledgeRecord) -> Result<String, ForgeError> {
        let mut text = self.text.clone();
        for slot in self.slots() {
            let value = match slot {
                "phonetic_type" => &record.phonetic_type,
                "phonetic_text" => &record.phonetic_text,
                "diagnostic_label" => &record.diagnostic_label,
                other => return Err(ForgeError::UnresolvableSlot(other.to_string())),
            };
            text = text.replace(&format!("{{{slot}}}"), value);
        }
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplatePool {
    pub topics: BTreeMap<Topic, Vec<QuestionTemplate>>,
}

impl QuestionTemplatePool {
    pub fn new(topics: BTreeMap<Topic, Vec<QuestionTemplate>>) -> Result<Self, ForgeError> {
        let pool = QuestionTemplatePool { topics };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        for (topic, templates) in &self.topics {
            if templates.is_empty() {
                return Err(ForgeError::EmptyTopic(*topic));
            }
            for t in templates {
                if !(t.weight.is_finite()) {
                    return Err(ForgeError::InvalidConfig(format!("non-finite weight in {topic}")));
                }
                if let Some(bad) = t.slots().into_iter().find(|s| !SLOTS.contains(s)) {
                    return Err(ForgeError::UnresolvableSlot(bad.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn templates(&self, topic: Topic) -> Result<&[QuestionTemplate], ForgeError> {
        self.topics.get(&topic).map(Vec::as_slice).ok_or(ForgeError::UnknownTopic(topic))
    }

    /// The built-in pool covering the three consultation topics.
    pub fn builtin() -> Self {
        let mut topics = BTreeMap::new();
        topics.insert(Topic::DysarthriaAssessment, to_templates(ASSESSMENT));
        topics.insert(Topic::TongueMotionAnalysis, to_templates(MOTION));
        topics.insert(Topic::RehabilitationAdvice, to_templates(ADVICE));
        QuestionTemplatePool { topics }
    }
}

fn to_templates(texts: &[&str]) -> Vec<QuestionTemplate> {
    texts.iter().map(|t| QuestionTemplate::new(*t)).collect()
}

const ASSESSMENT: &[&str] = &[
    "Does my recording of {phonetic_text} show signs of dysarthria?",
    "Is my speech considered normal or impaired?",
    "Would a clinician classify this {phonetic_type} sample as disordered?",
    "How severe is the articulation problem you see here?",
    "Can you assess whether I have a motor speech disorder?",
    "What evidence of slurred articulation appears in the ultrasound?",
    "Am I pronouncing {phonetic_text} like a typical speaker?",
    "Which findings support a {diagnostic_label} diagnosis?",
    "Could weakness after my stroke explain how I sound?",
    "Please grade my articulatory precision on this task.",
    "Are there abnormalities in how quickly my tongue reaches its target?",
    "Do the imaging results suggest reduced muscle control?",
    "How confident are you in the diagnostic label for this session?",
    "Why might someone say my vowels sound imprecise?",
    "Would you screen this patient for dysarthria based on one utterance?",
    "Compared with healthy talkers, where does my production deviate?",
    "What makes this {phonetic_type} clip look pathological or typical?",
    "Is there a clinical concern with my speech motor function?",
    "Tell me if the scan indicates impaired speech.",
    "Should I be worried about my intelligibility?",
    "Which acoustic or visual cues point to a speech disorder?",
    "Can ultrasound alone confirm my assessment result?",
    "Summarize your evaluation of this speaker in one sentence.",
    "Do I articulate consonant-vowel transitions correctly?",
    "Has my condition affected coordination between tongue and voice?",
    "What is your overall judgement: healthy or dysarthric?",
    "Is imprecise placement visible during {phonetic_text}?",
    "Does anything in this clip rule out a neurological cause?",
    "How would you rate my speech on a clinical severity scale?",
    "Where exactly did my production fall short?",
    "Would a therapist agree with the {diagnostic_label} label?",
    "Are the deviations in this recording mild, moderate or severe?",
    "Is my swallowing or speaking pattern a cause for referral?",
    "Explain the diagnosis in terms a patient could follow.",
    "Did the scan reveal anything unusual about muscle tone?",
    "List the symptoms you detected, if any.",
];

const MOTION: &[&str] = &[
    "How does my tongue tip move while I say {phonetic_text}?",
    "Describe the path of the tongue body during this {phonetic_type}.",
    "In which direction does the tongue root travel?",
    "Is the tongue rising or lowering over the clip?",
    "Explain the front-back movement you observe.",
    "Which tongue region moves the most?",
    "Does the dorsum reach a high enough position?",
    "What trajectory does the ultrasound reveal for each region?",
    "Is the anterior portion more active than the posterior one?",
    "How large is the vertical displacement in this sample?",
    "Are tip, body and root moving together or independently?",
    "Does my tongue retract toward the pharynx here?",
    "Walk me through the articulatory motion frame by frame.",
    "Was the movement smooth or jerky?",
    "Where does the tongue end up at the close of {phonetic_text}?",
    "How far forward does the blade advance?",
    "Characterize the motion amplitude of my articulation.",
    "What shape changes happen across the utterance?",
    "Do you see any tremor in the tracked points?",
    "Is the tongue elevated toward the palate at any moment?",
    "Which way did the root shift relative to the start?",
    "Compare the starting and final tongue postures.",
    "Did the tongue overshoot its articulatory target?",
    "How consistent is the motion pattern across regions?",
    "Interpret the normalized coordinates for me.",
    "What does the tracked curve say about timing?",
    "Is there evidence of restricted range of motion?",
    "Picture the sagittal view: what happens during the sound?",
    "Which region lags behind the others?",
    "Tell me about the kinematics of my tongue.",
    "Does the body of the tongue bunch or flatten?",
    "Are upward movements paired with backward ones?",
    "Did the articulators stay mostly still?",
    "What motion would a typical speaker show instead?",
    "How quickly does my tongue change position?",
    "Please describe tongue posture at onset and offset.",
];

const ADVICE: &[&str] = &[
    "What exercises could improve my {phonetic_text}?",
    "How should I practice this {phonetic_type} at home?",
    "Can you suggest drills to strengthen the tongue tip?",
    "What daily routine would help my articulation?",
    "Which therapy goals fit a {diagnostic_label} speaker?",
    "How many minutes a day should I train?",
    "Recommend biofeedback tasks using ultrasound.",
    "Are there tongue elevation exercises you advise?",
    "What should my speech therapist focus on next?",
    "How can I make my vowels clearer?",
    "Is mirror practice useful for my problem?",
    "Give me a weekly plan for rehabilitation.",
    "Which sounds should I rehearse first?",
    "Would slowing my speech rate help?",
    "What lifestyle changes support recovery after stroke?",
    "How do I know if therapy is working?",
    "Suggest a warm-up before speaking practice.",
    "Can breathing exercises improve my articulation?",
    "What can family members do to support me?",
    "Are apps or games recommended for this training?",
    "How should I adjust tongue placement for better accuracy?",
    "What feedback cues should I watch for on the scan?",
    "Is it safe to practice swallowing drills alone?",
    "Which strengthening moves target the tongue root?",
    "How long until I might see progress?",
    "Should therapy intensity change over time?",
    "Give me three concrete tips for today.",
    "What mistakes should I avoid while practicing?",
    "How can I maintain gains once therapy ends?",
    "Would group sessions benefit me?",
    "Can singing or reading aloud help with recovery?",
    "What homework would you assign after this session?",
    "Offer an exercise for faster tongue movements.",
    "Which posture should I keep while doing drills?",
    "Advise me on practicing sentences such as {phonetic_text}.",
    "Is rest as important as exercise for my speech?",
];
