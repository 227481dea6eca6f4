from django import forms

from .exceptions import ConfigurationError

DETECTOR_CHOICES = [
    ('erx', 'ERX'),
    ('rx-baseline', 'RX baseline'),
    ('rt-ck-rxd', 'RT-CK-RXD'),
    ('rx-bil', 'RX-BIL'),
    ('lbl-ad', 'LBL-AD'),
]
DIRECTION_CHOICES = [
    ('forward', 'Forward'),
    ('flipped', 'Flipped'),
    ('both', 'Both'),
]


def parse_number_list(text, cast=float):
    """'1, 3,5' -> [1, 3, 5]"""
    if text in (None, ''):
        return []
    if isinstance(text, (list, tuple)):
        return [cast(item) for item in text]
    try:
        return [cast(item) for item in str(text).split(',') if item.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"could not parse number list {text!r}: {exc}")


def validated(form_class, options):
    """Bind command options to a form and return cleaned data, or raise ConfigurationError"""
    form = form_class(data=options)
    if not form.is_valid():
        problems = '; '.join(
            f"{field}: {' '.join(messages)}" for field, messages in form.errors.items()
        )
        raise ConfigurationError(f"invalid options: {problems}")
    return form.cleaned_data


class DetectorOptionsForm(forms.Form):
    """Options shared by the run and ablate commands"""
    detector = forms.MultipleChoiceField(choices=DETECTOR_CHOICES)
    alpha = forms.FloatField(min_value=0.0, max_value=1.0)
    dims = forms.IntegerField(min_value=1)
    buffer = forms.IntegerField(min_value=1)
    epsilon = forms.FloatField(min_value=0.0)
    seeds = forms.IntegerField(min_value=1)
    first_seed = forms.IntegerField(required=False)
    directions = forms.ChoiceField(choices=DIRECTION_CHOICES)
    no_srp = forms.BooleanField(required=False)
    incremental = forms.BooleanField(required=False)
    eta = forms.FloatField(min_value=0.0, max_value=1.0)
    chunk = forms.IntegerField(min_value=1)
    components = forms.IntegerField(min_value=1)
    adaptive_exclude = forms.BooleanField(required=False)
    threshold = forms.FloatField(required=False)
    score_field = forms.ChoiceField(choices=[('norm', 'Normalized'), ('raw', 'Raw')])
    workers = forms.IntegerField(min_value=1)

    def clean_alpha(self):
        alpha = self.cleaned_data['alpha']
        if alpha <= 0:
            raise forms.ValidationError('Momentum must be greater than 0.')
        return alpha

    def clean_epsilon(self):
        epsilon = self.cleaned_data['epsilon']
        if epsilon <= 0:
            raise forms.ValidationError('Regularization must be greater than 0.')
        return epsilon

    def clean_first_seed(self):
        return self.cleaned_data.get('first_seed') or 0


class SyntheticSpecForm(forms.Form):
    """Options of the gen command for the synthetic cube"""
    lines = forms.IntegerField(min_value=1)
    pixels = forms.IntegerField(min_value=1)
    bands = forms.IntegerField(min_value=1)
    class_regions = forms.IntegerField(min_value=1)
    transition_width = forms.IntegerField(min_value=0)
    target_columns = forms.IntegerField(min_value=1)
    target_base_size = forms.IntegerField(min_value=1)
    size_cycle = forms.IntegerField(min_value=1)
    mixing_fractions = forms.CharField()
    target_repeats = forms.IntegerField(min_value=1)
    noise_sigma = forms.FloatField(min_value=0.0)
    brightness_sigma = forms.FloatField(min_value=0.0)
    seed = forms.IntegerField()
    name = forms.CharField(max_length=200)

    def clean_mixing_fractions(self):
        try:
            fractions = parse_number_list(self.cleaned_data['mixing_fractions'])
        except ConfigurationError as exc:
            raise forms.ValidationError(str(exc))
        if not fractions or any(not 0.0 <= f <= 1.0 for f in fractions):
            raise forms.ValidationError('Mixing fractions must lie between 0 and 1.')
        return fractions


class BenchOptionsForm(forms.Form):
    detector = forms.MultipleChoiceField(choices=DETECTOR_CHOICES)
    sweep = forms.ChoiceField(choices=[('bands', 'Bands'), ('pixels', 'Pixels'), ('both', 'Both')])
    lines = forms.IntegerField(min_value=2)
    repeats = forms.IntegerField(min_value=1)
    buffer = forms.IntegerField(min_value=1)
    seed = forms.IntegerField()

    def clean(self):
        cleaned = super().clean()
        lines, buffer = cleaned.get('lines'), cleaned.get('buffer')
        if lines is not None and buffer is not None and buffer >= lines:
            raise forms.ValidationError('The buffer must be shorter than the stream.')
        return cleaned
