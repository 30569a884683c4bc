from setuptools import setup


def readme():
    with open('README.md') as f:
        return f.read()


setup(name='fharmap',
      version='1.0',
      description='Numerical laboratory for F-harmonic sphere-valued maps',
      long_description=readme(),
      classifiers=[],
      keywords='harmonic maps, monotonicity, stratification, rectifiability',
      author='fharmap developers',
      license='GPLv3',
      packages=['fharmap', 'fharmap.functional', 'fharmap.analysis'],
      package_data={'fharmap': ['data/*']},
      install_requires=['numpy', 'scipy', 'statsmodels'],
      setup_requires=['pytest-runner'],
      tests_require=['pytest', 'hypothesis'],
      entry_points={
          'console_scripts': [
              'fharmap=fharmap.fharmap:main'
              ]
      },
      include_package_data=True,
      zip_safe=False)
