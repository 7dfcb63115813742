use crate::schema::ArgumentKind;

pub(crate) const SENTENCE: &str = "<SENTENCE>";
pub(crate) const OUTPUT: &str = "<OUTPUT>";
pub(crate) const CONST_DRUG: &str = "<CONST_DRUG>";
pub(crate) const CONST_EFFECT: &str = "<CONST_EFFECT>";

const FLAT_FORMAT: &str = "[{\"event_type\": event type, \"arguments\":[{\"argument_type\": \
argument type, \"argument_span\":argument extraction}]}]";

pub(crate) const SCHEMA_PREAMBLE: &str = "Extract event information from the following sentence \
and return events in json format as this: [{\"event_type\": event type, \"arguments\":[{\"argument_type\": \
argument type, \"argument_span\":argument extraction}]}]. Event type: adverse event, potential \
therapeutic event. Argument type: subject, age, gender, race, population, subject_disorder, \
treatment, drug, dosage, route, duration, frequency, time_elapsed, indication, combination_drug, \
effect.";

pub(crate) const SCHEMA_EXPLAINED: &str = "Event type: adverse event (an event shows the use of a \
drug or combination of drugs cause a harmful effect on the human patient), potential therapeutic \
event (an event shows the use of a drug or combination of drugs bring a potential beneficial effect \
on the human patient). Argument type: subject (overall description of the patients involved in the \
event), age (the concrete age or an age range of the subject), gender (the subject's gender), race \
(the subject's race or nationality), population (the number of patients receiving the treatment), \
subject_disorder (the subject's disorders), treatment (overall description of the therapy \
administered to the patients), drug (the drugs used as therapy in the event), dosage (the amount of \
the drug is given), route (the route of the drug administration), duration (how long the patient \
has been taking the medicine), frequency (the frequency of drug use), time_elapsed (the time elapsed \
after the drug was administered to the occurrence of the side effect), indication (the target \
disorder of the medicine administration), combination_drug (the drugs used in combination), effect \
(the side effect in the adverse event or the beneficial effect in the potential therapeutic event).";

pub(crate) fn explanation_preamble() -> String {
    format!(
        "Extract event information from the following sentence and return events in json format \
         as this: {FLAT_FORMAT}. {SCHEMA_EXPLAINED}"
    )
}

pub(crate) const PROSE_QUERY: &str = "Sentence: <SENTENCE> Output:";

pub(crate) const CODE_PREAMBLE: &str = "Argument = {\"argument_type\": str, #options: [subject, age, \
gender,race, population, subject_disorder, treatment, drug, dosage, route, duration, frequency, \
time_elapsed, indication, combination_drug, effect]\n\"argument_span\": str,}\nEvent ={\"event_type\": \
str, #options: [adverse_event, potential_therapeutic_event]\n\"arguments\": List[Argument],}";

pub(crate) const CODE_QUERY: &str =
    "events: List[Event] = extract events in the sentence: <SENTENCE>\nprint(json.dumps(events))";

pub(crate) const STAGE1: &str = "Extract adverse events and potential therapeutic events in the \
sentence, as well as the information about the subject (the patient), the treatment and the effect \
of the treatment involved in the event. Return the output in json format as this: [{\"event_type\": \
event type, \"subject\": span of subject information, \"treatment\": span of treatment information, \
\"effect\": span of effect information}]. Event type: adverse event, potential therapeutic event. \
Sentence: <SENTENCE> Output:";

pub(crate) const STAGE2: &str = "Answer the question related to the given sentence and given event \
information. The answer should be a span exactly extracted from the sentence. If no answer can be \
found from the sentence, return N/A. Sentence: <SENTENCE> Event: Event type: <EVENT_TYPE> Subject: \
<SUBJECT> Treatment: <TREATMENT> Effect: <EFFECT>. <QUESTION>";

pub(crate) fn question(kind: ArgumentKind) -> Option<&'static str> {
    use ArgumentKind::*;
    Some(match kind {
        Age => "What's the age of the subject?",
        Gender => "What's the gender of the subject?",
        Race => "What's the race or the nationality of the subject?",
        Population => "How many subjects are involved in the event?",
        SubjectDisorder => "What disorders do the subjects suffer from?",
        Drug => "What drugs are administered to the subject?",
        Dosage => "What amount of the drug is administered to the subject?",
        Route => "What route is the drug given to the subject?",
        Duration => "How long have the subject been taking the drug until the event occurred?",
        Frequency => "How frequently does the subject take the drug?",
        TimeElapsed => {
            "How long has elapsed since the patient started or ended dosing until the event occurred?"
        }
        TreatmentDisorder => "What's the target disease of the treatment?",
        CombinationDrug => "What drugs are used in combination in the event",
        Subject | Treatment | Effect => return None,
    })
}

pub(crate) const SYNTH_HEAD: &str =
    "Sentence: <SENTENCE> The events involved in the sentence are: <OUTPUT>";

pub(crate) const SYNTH_ADE: &str = "Generate a sentence with an adverse event which has a similar \
structure as the given sentence, and extract the events in the generated sentence. The drug \
<CONST_DRUG> must appear in the event, and the effect should be <CONST_EFFECT>.";

pub(crate) const SYNTH_PTE: &str = "Generate a sentence with a potential therapeutic event which has \
a similar structure as the given sentence, and extract the events in the generated sentence. The \
drug <CONST_DRUG> must appear in the event.";

pub(crate) const SYNTH_MULTI: &str = "Generate a sentence with multiple events which has a similar \
structure as the given sentence, and extract the events in the generated sentence.";

pub(crate) const SYNTH_TAIL: &str = "Return in the following json format: {\"sentence\":the \
generated sentence, \"output\": [{\"event_type\": event type, \"event_trigger\": the token \
indicating the existence of the event, \"arguments\":[{\"argument_type\": argument type, \
\"argument_span\":argument extraction}]}]}. Return the json output only.";
