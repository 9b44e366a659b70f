from setuptools import setup
import sys,os

with open('mechsqueeze/description.txt') as f:
    long_description = f.read()

setup(
    name = 'mechsqueeze',
    version = '0.1.0',
    description = 'Feedback squeezing of a mechanical oscillator under continuous back-action evading measurement',
    long_description = long_description,
    license='GPL v3',
    packages = ['mechsqueeze'],
    package_data={'mechsqueeze': ['presets/*.conf',
                  'description.txt']
                 },
    install_requires=['numpy>=1.17',
                      'scipy>=1.6',
                      'pandas>=0.22',
                      'joblib>=0.16.0'],
    entry_points = {
        'console_scripts': [
            'mechsqueeze=mechsqueeze.app:main']
            },
    classifiers = ['Operating System :: OS Independent',
            'Programming Language :: Python :: 3.8',
            'Operating System :: MacOS :: MacOS X',
            'Operating System :: Microsoft :: Windows',
            'Operating System :: POSIX',
            'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
            'Development Status :: 3 - Alpha',
            'Intended Audience :: Science/Research',
            'Topic :: Scientific/Engineering :: Physics'],
    keywords = ['optomechanics','squeezing','feedback','quantum control'],
)
