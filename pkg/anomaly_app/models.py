from django.db import models


class DetectionRun(models.Model):
    """One detector pass over one cube, direction and seed"""
    DIRECTIONS = [
        ('forward', 'Forward'),
        ('flipped', 'Flipped'),
    ]

    detector = models.CharField(max_length=32)
    dataset = models.CharField(max_length=200)
    direction = models.CharField(max_length=10, choices=DIRECTIONS, default='forward')
    seed = models.IntegerField(default=0)
    auc = models.FloatField(blank=True, null=True)
    auc_td = models.FloatField(blank=True, null=True)
    auc_bs = models.FloatField(blank=True, null=True)
    lps = models.FloatField()
    warmup_lines = models.PositiveIntegerField(default=0)
    lines = models.PositiveIntegerField(default=0)
    pixels = models.PositiveIntegerField(default=0)
    bands = models.PositiveIntegerField(default=0)
    config = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"{self.detector} on {self.dataset} ({self.direction}, seed {self.seed})"

    @classmethod
    def from_record(cls, record):
        """Persist a metrics.RunRecord"""
        return cls.objects.create(
            detector=record.detector,
            dataset=record.dataset,
            direction=record.direction,
            seed=record.seed,
            auc=record.auc,
            auc_td=record.auc_td,
            auc_bs=record.auc_bs,
            lps=record.lps,
            warmup_lines=record.warmup_lines,
            lines=record.lines,
            pixels=record.pixels,
            bands=record.bands,
            config=record.config,
        )


class ThroughputRecord(models.Model):
    """Mean lines-per-second of one detector at one cube shape"""
    detector = models.CharField(max_length=32)
    pixels = models.PositiveIntegerField()
    bands = models.PositiveIntegerField()
    lines = models.PositiveIntegerField()
    repeats = models.PositiveIntegerField(default=1)
    lps_mean = models.FloatField()
    lps_sd = models.FloatField(default=0.0)
    host = models.CharField(max_length=200, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['detector', 'bands', 'pixels']

    def __str__(self):
        return f"{self.detector} {self.pixels}px x {self.bands} bands: {self.lps_mean:.1f} LPS"
