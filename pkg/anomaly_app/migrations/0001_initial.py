from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='DetectionRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('detector', models.CharField(max_length=32)),
                ('dataset', models.CharField(max_length=200)),
                ('direction', models.CharField(choices=[('forward', 'Forward'), ('flipped', 'Flipped')], default='forward', max_length=10)),
                ('seed', models.IntegerField(default=0)),
                ('auc', models.FloatField(blank=True, null=True)),
                ('auc_td', models.FloatField(blank=True, null=True)),
                ('auc_bs', models.FloatField(blank=True, null=True)),
                ('lps', models.FloatField()),
                ('warmup_lines', models.PositiveIntegerField(default=0)),
                ('lines', models.PositiveIntegerField(default=0)),
                ('pixels', models.PositiveIntegerField(default=0)),
                ('bands', models.PositiveIntegerField(default=0)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
        migrations.CreateModel(
            name='ThroughputRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('detector', models.CharField(max_length=32)),
                ('pixels', models.PositiveIntegerField()),
                ('bands', models.PositiveIntegerField()),
                ('lines', models.PositiveIntegerField()),
                ('repeats', models.PositiveIntegerField(default=1)),
                ('lps_mean', models.FloatField()),
                ('lps_sd', models.FloatField(default=0.0)),
                ('host', models.CharField(blank=True, max_length=200)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['detector', 'bands', 'pixels'],
            },
        ),
    ]
